#include "blindrestore/grad.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "blindrestore/convolve.hpp"

namespace blindrestore::grad {

Var Tape::push(Tensor value, std::vector<Var> parents,
               std::function<void(const Tensor&, std::vector<Tensor>&)> back) {
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(back)});
    return (int)nodes_.size() - 1;
}

Tensor& Tape::grad_slot(std::vector<Tensor>& grads, Var v) {
    if (grads[v].numel() == 0 && nodes_[v].value.numel() != 0) grads[v] = Tensor(nodes_[v].value.shape());
    return grads[v];
}

Var Tape::leaf(Tensor value) {
    return push(std::move(value), {}, nullptr);
}

Var Tape::add(Var a, Var b) {
    Tensor out = val(a) + val(b);
    return push(std::move(out), {a, b}, [this, a, b](const Tensor& g, std::vector<Tensor>& gr) {
        grad_slot(gr, a) += g;
        grad_slot(gr, b) += g;
    });
}

Var Tape::sub(Var a, Var b) {
    Tensor out = val(a) - val(b);
    return push(std::move(out), {a, b}, [this, a, b](const Tensor& g, std::vector<Tensor>& gr) {
        grad_slot(gr, a) += g;
        grad_slot(gr, b) -= g;
    });
}

Var Tape::mul(Var a, Var b) {
    Tensor out = blindrestore::mul(val(a), val(b));
    return push(std::move(out), {a, b}, [this, a, b](const Tensor& g, std::vector<Tensor>& gr) {
        grad_slot(gr, a) += blindrestore::mul(g, val(b));
        grad_slot(gr, b) += blindrestore::mul(g, val(a));
    });
}

Var Tape::scale(Var a, double c) {
    Tensor out = val(a) * c;
    return push(std::move(out), {a}, [this, a, c](const Tensor& g, std::vector<Tensor>& gr) {
        grad_slot(gr, a) += g * c;
    });
}

Var Tape::relu(Var a) {
    Tensor out(val(a).shape());
    const Tensor& x = val(a);
    for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return push(std::move(out), {a}, [this, a](const Tensor& g, std::vector<Tensor>& gr) {
        Tensor& ga = grad_slot(gr, a);
        const Tensor& x = val(a);
        for (int64_t i = 0; i < x.numel(); ++i)
            if (x[i] > 0.0) ga[i] += g[i];
    });
}

Var Tape::reshape(Var a, Shape shape) {
    if (shape_numel(shape) != val(a).numel())
        throw std::invalid_argument("reshape changes element count");
    Tensor out(std::move(shape), val(a).vec());
    return push(std::move(out), {a}, [this, a](const Tensor& g, std::vector<Tensor>& gr) {
        Tensor& ga = grad_slot(gr, a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    });
}

Var Tape::slice(Var a, int64_t offset, Shape shape) {
    int64_t n = shape_numel(shape);
    if (offset < 0 || offset + n > val(a).numel())
        throw std::out_of_range("slice outside parent tensor");
    Tensor out(std::move(shape));
    const Tensor& x = val(a);
    for (int64_t i = 0; i < n; ++i) out[i] = x[offset + i];
    return push(std::move(out), {a}, [this, a, offset, n](const Tensor& g, std::vector<Tensor>& gr) {
        Tensor& ga = grad_slot(gr, a);
        for (int64_t i = 0; i < n; ++i) ga[offset + i] += g[i];
    });
}

Var Tape::conv2d(Var x, Var k) {
    Tensor out = conv2d_reflect(val(x), val(k));
    return push(std::move(out), {x, k}, [this, x, k](const Tensor& g, std::vector<Tensor>& gr) {
        if (needs(x)) grad_slot(gr, x) += conv2d_reflect_adjoint_input(g, val(k));
        if (needs(k)) grad_slot(gr, k) += conv2d_reflect_grad_kernel(val(x), g, val(k).shape());
    });
}

Var Tape::conv_block(Var x, Var w, Var b) {
    const Tensor& xi = val(x);
    const Tensor& wt = val(w);
    const Tensor& bt = val(b);
    if (xi.rank() != 3 || wt.rank() != 4 || bt.rank() != 1)
        throw std::invalid_argument("conv_block expects x[C,H,W], w[OC,C,kh,kw], b[OC]");
    int64_t C = xi.dim(0), H = xi.dim(1), W = xi.dim(2);
    int64_t OC = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
    if (wt.dim(1) != C || bt.dim(0) != OC)
        throw std::invalid_argument("conv_block channel mismatch");
    if (kh != 3 || kw != 3) throw std::invalid_argument("conv_block supports 3x3 kernels");
    // reflect indexing stays valid even when the plane is smaller than the
    // kernel, which happens at the coarsest level of small inputs
    int64_t Wp = W + 2;
    int64_t pad_sz = (H + 2) * Wp;
    // padded input planes shared by forward and backward
    auto pads = std::make_shared<std::vector<double>>((size_t)(C * pad_sz));
    for (int64_t c = 0; c < C; ++c)
        convdetail::pad_plane(xi.data() + c * H * W, pads->data() + c * pad_sz, H, W, 1, 1);

    Tensor out({OC, H, W});
    for (int64_t oc = 0; oc < OC; ++oc) {
        double* o = out.data() + oc * H * W;
        double bias = bt[oc];
        for (int64_t i = 0; i < H * W; ++i) o[i] = bias;
        for (int64_t c = 0; c < C; ++c) {
            const double* padp = pads->data() + c * pad_sz;
            const double* wp = wt.data() + ((oc * C + c) * 3) * 3;
            for (int64_t i = 0; i < H; ++i) {
                const double* __restrict r0 = padp + i * Wp;
                const double* __restrict r1 = r0 + Wp;
                const double* __restrict r2 = r1 + Wp;
                double* __restrict orow = o + i * W;
                for (int64_t j = 0; j < W; ++j)
                    orow[j] += wp[0] * r0[j] + wp[1] * r0[j + 1] + wp[2] * r0[j + 2] +
                               wp[3] * r1[j] + wp[4] * r1[j + 1] + wp[5] * r1[j + 2] +
                               wp[6] * r2[j] + wp[7] * r2[j + 1] + wp[8] * r2[j + 2];
            }
        }
    }
    return push(std::move(out), {x, w, b}, [this, x, w, b, C, H, W, OC, Wp, pad_sz, pads](
                                    const Tensor& g, std::vector<Tensor>& gr) {
        const Tensor& wt = val(w);
        bool want_x = needs(x), want_w = needs(w);
        std::vector<double> gpad(want_x ? (size_t)pad_sz : 0);
        // g planes zero-extended by 2 on each side, for the gather adjoint
        int64_t Wz = W + 4;
        int64_t gz_sz = (H + 4) * Wz;
        std::vector<double> gzero(want_x ? (size_t)(OC * gz_sz) : 0, 0.0);
        if (want_x) {
            for (int64_t oc = 0; oc < OC; ++oc)
                for (int64_t i = 0; i < H; ++i) {
                    const double* src_row = g.data() + (oc * H + i) * W;
                    double* dst = gzero.data() + oc * gz_sz + (i + 2) * Wz + 2;
                    for (int64_t j = 0; j < W; ++j) dst[j] = src_row[j];
                }
        }
        for (int64_t c = 0; c < C; ++c) {
            if (want_x) std::fill(gpad.begin(), gpad.end(), 0.0);
            const double* padp = pads->data() + c * pad_sz;
            for (int64_t oc = 0; oc < OC; ++oc) {
                const double* gp = g.data() + oc * H * W;
                const double* wp = wt.data() + ((oc * C + c) * 3) * 3;
                if (want_x) {
                    // gather form of the scatter adjoint over a zero-extended g
                    const double* __restrict gz = gzero.data() + oc * gz_sz;
                    for (int64_t a = 0; a < H + 2; ++a) {
                        double* __restrict prow = gpad.data() + a * Wp;
                        const double* __restrict q0 = gz + a * Wz;
                        const double* __restrict q1 = q0 + Wz;
                        const double* __restrict q2 = q1 + Wz;
                        for (int64_t b = 0; b < Wp; ++b)
                            prow[b] += wp[8] * q0[b] + wp[7] * q0[b + 1] + wp[6] * q0[b + 2] +
                                       wp[5] * q1[b] + wp[4] * q1[b + 1] + wp[3] * q1[b + 2] +
                                       wp[2] * q2[b] + wp[1] * q2[b + 1] + wp[0] * q2[b + 2];
                    }
                }
                if (want_w) {
                    double acc[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
                    for (int64_t i = 0; i < H; ++i) {
                        const double* __restrict grow = gp + i * W;
                        for (int u = 0; u < 3; ++u) {
                            const double* __restrict r = padp + (i + u) * Wp;
                            for (int v = 0; v < 3; ++v) {
                                const double* __restrict rs = r + v;
                                double a = 0.0;
                                for (int64_t j = 0; j < W; ++j) a += rs[j] * grow[j];
                                acc[u * 3 + v] += a;
                            }
                        }
                    }
                    double* gwp = grad_slot(gr, w).data() + ((oc * C + c) * 3) * 3;
                    for (int t = 0; t < 9; ++t) gwp[t] += acc[t];
                }
            }
            if (want_x) convdetail::fold_plane(gpad.data(), grad_slot(gr, x).data() + c * H * W, H, W, 1, 1);
        }
        if (needs(b)) {
            Tensor& gb = grad_slot(gr, b);
            for (int64_t oc = 0; oc < OC; ++oc) {
                const double* gp = g.data() + oc * H * W;
                double acc = 0.0;
                for (int64_t i = 0; i < H * W; ++i) acc += gp[i];
                gb[oc] += acc;
            }
        }
    });
}

Var Tape::avg_pool2(Var x) {
    const Tensor& xi = val(x);
    if (xi.rank() < 2) throw std::invalid_argument("avg_pool2 expects rank >= 2");
    int64_t H = xi.dim(-2), W = xi.dim(-1);
    if (H % 2 || W % 2) throw std::invalid_argument("avg_pool2 needs even H and W");
    int64_t planes = xi.numel() / (H * W);
    Shape oshape = xi.shape();
    oshape[oshape.size() - 2] = H / 2;
    oshape[oshape.size() - 1] = W / 2;
    Tensor out(oshape);
    for (int64_t p = 0; p < planes; ++p) {
        const double* xp = xi.data() + p * H * W;
        double* op = out.data() + p * (H / 2) * (W / 2);
        for (int64_t i = 0; i < H / 2; ++i)
            for (int64_t j = 0; j < W / 2; ++j)
                op[i * (W / 2) + j] = 0.25 * (xp[(2 * i) * W + 2 * j] + xp[(2 * i) * W + 2 * j + 1] +
                                              xp[(2 * i + 1) * W + 2 * j] + xp[(2 * i + 1) * W + 2 * j + 1]);
    }
    return push(std::move(out), {x}, [this, x, H, W, planes](const Tensor& g, std::vector<Tensor>& gr) {
        Tensor& gx = grad_slot(gr, x);
        for (int64_t p = 0; p < planes; ++p) {
            const double* gp = g.data() + p * (H / 2) * (W / 2);
            double* gxp = gx.data() + p * H * W;
            for (int64_t i = 0; i < H / 2; ++i)
                for (int64_t j = 0; j < W / 2; ++j) {
                    double v = 0.25 * gp[i * (W / 2) + j];
                    gxp[(2 * i) * W + 2 * j] += v;
                    gxp[(2 * i) * W + 2 * j + 1] += v;
                    gxp[(2 * i + 1) * W + 2 * j] += v;
                    gxp[(2 * i + 1) * W + 2 * j + 1] += v;
                }
        }
    });
}

Var Tape::upsample_nearest2(Var x) {
    const Tensor& xi = val(x);
    if (xi.rank() < 2) throw std::invalid_argument("upsample_nearest2 expects rank >= 2");
    int64_t H = xi.dim(-2), W = xi.dim(-1);
    int64_t planes = xi.numel() / (H * W);
    Shape oshape = xi.shape();
    oshape[oshape.size() - 2] = 2 * H;
    oshape[oshape.size() - 1] = 2 * W;
    Tensor out(oshape);
    for (int64_t p = 0; p < planes; ++p) {
        const double* xp = xi.data() + p * H * W;
        double* op = out.data() + p * 4 * H * W;
        for (int64_t i = 0; i < H; ++i)
            for (int64_t j = 0; j < W; ++j) {
                double v = xp[i * W + j];
                op[(2 * i) * 2 * W + 2 * j] = v;
                op[(2 * i) * 2 * W + 2 * j + 1] = v;
                op[(2 * i + 1) * 2 * W + 2 * j] = v;
                op[(2 * i + 1) * 2 * W + 2 * j + 1] = v;
            }
    }
    return push(std::move(out), {x}, [this, x, H, W, planes](const Tensor& g, std::vector<Tensor>& gr) {
        Tensor& gx = grad_slot(gr, x);
        for (int64_t p = 0; p < planes; ++p) {
            const double* gp = g.data() + p * 4 * H * W;
            double* gxp = gx.data() + p * H * W;
            for (int64_t i = 0; i < H; ++i)
                for (int64_t j = 0; j < W; ++j)
                    gxp[i * W + j] += gp[(2 * i) * 2 * W + 2 * j] + gp[(2 * i) * 2 * W + 2 * j + 1] +
                                      gp[(2 * i + 1) * 2 * W + 2 * j] + gp[(2 * i + 1) * 2 * W + 2 * j + 1];
        }
    });
}

Var Tape::concat_channels(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.rank() != 3 || tb.rank() != 3 || ta.dim(1) != tb.dim(1) || ta.dim(2) != tb.dim(2))
        throw std::invalid_argument("concat_channels expects [C,H,W] with equal planes");
    int64_t Ca = ta.dim(0), Cb = tb.dim(0), plane = ta.dim(1) * ta.dim(2);
    Tensor out({Ca + Cb, ta.dim(1), ta.dim(2)});
    for (int64_t i = 0; i < Ca * plane; ++i) out[i] = ta[i];
    for (int64_t i = 0; i < Cb * plane; ++i) out[Ca * plane + i] = tb[i];
    return push(std::move(out), {a, b}, [this, a, b, Ca, Cb, plane](const Tensor& g, std::vector<Tensor>& gr) {
        Tensor& ga = grad_slot(gr, a);
        Tensor& gb = grad_slot(gr, b);
        for (int64_t i = 0; i < Ca * plane; ++i) ga[i] += g[i];
        for (int64_t i = 0; i < Cb * plane; ++i) gb[i] += g[Ca * plane + i];
    });
}

Var Tape::decode(Var z, const Codec& codec) {
    Tensor out = codec.decode(val(z));
    return push(std::move(out), {z}, [this, z, codec](const Tensor& g, std::vector<Tensor>& gr) {
        grad_slot(gr, z) += codec.decode_adjoint(g);
    });
}

Var Tape::sum_squares(Var a) {
    const Tensor& x = val(a);
    double s = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) s += x[i] * x[i];
    return push(Tensor::scalar(s), {a}, [this, a](const Tensor& g, std::vector<Tensor>& gr) {
        Tensor& ga = grad_slot(gr, a);
        const Tensor& x = val(a);
        double c = 2.0 * g.item();
        for (int64_t i = 0; i < x.numel(); ++i) ga[i] += c * x[i];
    });
}

Var Tape::sum_abs(Var a) {
    const Tensor& x = val(a);
    double s = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) s += x[i] < 0 ? -x[i] : x[i];
    return push(Tensor::scalar(s), {a}, [this, a](const Tensor& g, std::vector<Tensor>& gr) {
        Tensor& ga = grad_slot(gr, a);
        const Tensor& x = val(a);
        double c = g.item();
        for (int64_t i = 0; i < x.numel(); ++i)
            ga[i] += c * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
    });
}

Var Tape::grad_diff_penalty(Var a, Tensor reference) {
    const Tensor& x = val(a);
    x.check_same(reference);
    if (x.rank() < 2) throw std::invalid_argument("grad_diff_penalty expects rank >= 2");
    int64_t H = x.dim(-2), W = x.dim(-1);
    int64_t planes = x.numel() / (H * W);
    double s = 0.0;
    for (int64_t p = 0; p < planes; ++p) {
        const double* xp = x.data() + p * H * W;
        const double* rp = reference.data() + p * H * W;
        for (int64_t i = 0; i < H; ++i)
            for (int64_t j = 0; j < W; ++j) {
                if (j + 1 < W) {
                    double d = (xp[i * W + j + 1] - xp[i * W + j]) - (rp[i * W + j + 1] - rp[i * W + j]);
                    s += d * d;
                }
                if (i + 1 < H) {
                    double d = (xp[(i + 1) * W + j] - xp[i * W + j]) - (rp[(i + 1) * W + j] - rp[i * W + j]);
                    s += d * d;
                }
            }
    }
    Tensor ref = std::move(reference);
    return push(Tensor::scalar(s), {a}, [this, a, ref = std::move(ref), H, W, planes](
                                       const Tensor& g, std::vector<Tensor>& gr) {
        Tensor& ga = grad_slot(gr, a);
        const Tensor& x = val(a);
        double c = 2.0 * g.item();
        for (int64_t p = 0; p < planes; ++p) {
            const double* xp = x.data() + p * H * W;
            const double* rp = ref.data() + p * H * W;
            double* gp = ga.data() + p * H * W;
            for (int64_t i = 0; i < H; ++i)
                for (int64_t j = 0; j < W; ++j) {
                    if (j + 1 < W) {
                        double d = (xp[i * W + j + 1] - xp[i * W + j]) - (rp[i * W + j + 1] - rp[i * W + j]);
                        gp[i * W + j + 1] += c * d;
                        gp[i * W + j] -= c * d;
                    }
                    if (i + 1 < H) {
                        double d = (xp[(i + 1) * W + j] - xp[i * W + j]) - (rp[(i + 1) * W + j] - rp[i * W + j]);
                        gp[(i + 1) * W + j] += c * d;
                        gp[i * W + j] -= c * d;
                    }
                }
        }
    });
}

std::vector<Tensor> Tape::grad(Var loss, const std::vector<Var>& wrt) {
    if (loss < 0 || loss >= (int)nodes_.size()) throw std::out_of_range("grad: bad loss node");
    if (nodes_[loss].value.rank() != 0)
        throw std::invalid_argument("grad: loss must be a scalar node");

    // a node's gradient is useful when the node sits on a forward path from a
    // requested leaf: mark ascending, parents always precede children
    needed_.assign(nodes_.size(), 0);
    for (Var v : wrt) {
        if (v < 0 || v >= (int)nodes_.size()) throw std::out_of_range("grad: bad wrt node");
        needed_[v] = 1;
    }
    for (Var v = 0; v < (int)nodes_.size(); ++v) {
        if (needed_[v]) continue;
        for (Var p : nodes_[v].parents)
            if (needed_[p]) {
                needed_[v] = 1;
                break;
            }
    }

    std::vector<Tensor> grads(nodes_.size());
    grads[loss] = Tensor::scalar(1.0);
    // nodes were appended parents-first, so a reverse sweep is a valid
    // topological order
    for (Var v = loss; v >= 0; --v) {
        if (grads[v].numel() == 0 || !nodes_[v].back) continue;
        bool any_parent_needed = false;
        for (Var p : nodes_[v].parents)
            if (needed_[p]) {
                any_parent_needed = true;
                break;
            }
        if (any_parent_needed) nodes_[v].back(grads[v], grads);
    }
    needed_.clear();
    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (Var v : wrt) {
        if (v < 0 || v >= (int)nodes_.size()) throw std::out_of_range("grad: bad wrt node");
        if (grads[v].numel() == 0)
            out.push_back(Tensor(nodes_[v].value.shape()));
        else
            out.push_back(std::move(grads[v]));
    }
    return out;
}

void adam_step(AdamState& st, Tensor& params, const Tensor& g) {
    params.check_same(g);
    st.m.check_same(params);
    st.step += 1;
    double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    double c1 = 1.0 - std::pow(b1, (double)st.step);
    double c2 = 1.0 - std::pow(b2, (double)st.step);
    for (int64_t i = 0; i < params.numel(); ++i) {
        st.m[i] = b1 * st.m[i] + (1.0 - b1) * g[i];
        st.v[i] = b2 * st.v[i] + (1.0 - b2) * g[i] * g[i];
        double mhat = st.m[i] / c1;
        double vhat = st.v[i] / c2;
        params[i] = params[i] - st.cfg.lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
    }
}

}  // namespace blindrestore::grad
