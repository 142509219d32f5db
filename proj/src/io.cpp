#include "blindrestore/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace blindrestore {

namespace {

int read_pnm_token(std::istream& in) {
    // skips whitespace and '#' comments
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v;
    if (!(in >> v)) throw IoError("image: malformed header field");
    return v;
}

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                          (unsigned char)((v >> 16) & 0xff), (unsigned char)((v >> 24) & 0xff)};
    out.write((const char*)b, 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read((char*)b, 4)) throw IoError("tensor: truncated header");
    return (uint32_t)b[0] | ((uint32_t)b[1] << 8) | ((uint32_t)b[2] << 16) | ((uint32_t)b[3] << 24);
}

void put_f64(std::ostream& out, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((u >> (8 * i)) & 0xff);
    out.write((const char*)b, 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    if (!in.read((char*)b, 8)) throw IoError("tensor: truncated payload");
    uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= (uint64_t)b[i] << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace

Image read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("image: cannot open '" + path + "'");
    char m0 = (char)in.get(), m1 = (char)in.get();
    bool color;
    if (m0 == 'P' && m1 == '5') color = false;
    else if (m0 == 'P' && m1 == '6') color = true;
    else throw IoError("image: bad magic in '" + path + "' (want P5 or P6)");

    int w = read_pnm_token(in);
    int h = read_pnm_token(in);
    int maxval = read_pnm_token(in);
    if (w < 1 || h < 1) throw IoError("image: bad dimensions in '" + path + "'");
    if (maxval != 255) throw IoError("image: maxval must be 255 in '" + path + "'");
    in.get();  // single whitespace before the raster

    int64_t channels = color ? 3 : 1;
    int64_t count = (int64_t)w * h * channels;
    std::vector<unsigned char> raw(count);
    if (!in.read((char*)raw.data(), count)) throw IoError("image: truncated raster in '" + path + "'");

    Shape shape = color ? Shape{3, h, w} : Shape{h, w};
    Image img(shape);
    if (!color) {
        for (int64_t i = 0; i < count; ++i) img[i] = raw[i] / 255.0;
    } else {
        // interleaved rgb -> planar
        for (int64_t p = 0; p < (int64_t)h * w; ++p)
            for (int64_t c = 0; c < 3; ++c) img[c * h * w + p] = raw[p * 3 + c] / 255.0;
    }
    return img;
}

void write_image(const std::string& path, const Image& img) {
    if (img.rank() != 2 && !(img.rank() == 3 && (img.dim(0) == 1 || img.dim(0) == 3)))
        throw IoError("image: writable shapes are [H,W], [1,H,W], [3,H,W]; got " +
                      shape_str(img.shape()));
    bool color = img.rank() == 3 && img.dim(0) == 3;
    int64_t h = img.dim(-2), w = img.dim(-1);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("image: cannot write '" + path + "'");
    out << (color ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
    auto quantize = [](double v) {
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        return (unsigned char)std::lround(v * 255.0);
    };
    std::vector<unsigned char> raw;
    raw.reserve((size_t)h * w * (color ? 3 : 1));
    if (!color) {
        for (int64_t p = 0; p < h * w; ++p) raw.push_back(quantize(img[p]));
    } else {
        for (int64_t p = 0; p < h * w; ++p)
            for (int64_t c = 0; c < 3; ++c) raw.push_back(quantize(img[c * h * w + p]));
    }
    out.write((const char*)raw.data(), raw.size());
    if (!out) throw IoError("image: write failed for '" + path + "'");
}

Tensor read_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("tensor: cannot open '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "BRT1", 4) != 0)
        throw IoError("tensor: bad magic in '" + path + "'");
    uint32_t rank = get_u32(in);
    if (rank > 8) throw IoError("tensor: implausible rank in '" + path + "'");
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = (int64_t)get_u32(in);
    Tensor t(shape);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = get_f64(in);
    // must be exactly at end of file
    in.peek();
    if (!in.eof()) throw IoError("tensor: trailing bytes in '" + path + "'");
    return t;
}

void write_tensor(const std::string& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("tensor: cannot write '" + path + "'");
    out.write("BRT1", 4);
    put_u32(out, (uint32_t)t.rank());
    for (int64_t d : t.shape()) put_u32(out, (uint32_t)d);
    for (int64_t i = 0; i < t.numel(); ++i) put_f64(out, t[i]);
    if (!out) throw IoError("tensor: write failed for '" + path + "'");
}

Tensor read_kernel_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("kernel: cannot open '" + path + "'");
    int64_t rows, cols;
    if (!(in >> rows >> cols) || rows < 1 || cols < 1)
        throw IoError("kernel: bad header in '" + path + "'");
    Tensor k({rows, cols});
    for (int64_t i = 0; i < k.numel(); ++i)
        if (!(in >> k[i])) throw IoError("kernel: truncated matrix in '" + path + "'");
    return k;
}

void write_kernel_text(const std::string& path, const Tensor& k) {
    if (k.rank() != 2) throw IoError("kernel: rank-2 tensor required");
    std::ofstream out(path);
    if (!out) throw IoError("kernel: cannot write '" + path + "'");
    out << k.dim(0) << " " << k.dim(1) << "\n";
    char buf[40];
    for (int64_t i = 0; i < k.dim(0); ++i) {
        for (int64_t j = 0; j < k.dim(1); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", k.at(i, j));
            out << buf << (j + 1 < k.dim(1) ? " " : "");
        }
        out << "\n";
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace blindrestore
