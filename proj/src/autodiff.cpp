#include "davsn/autodiff.h"

#include <algorithm>
#include <cmath>

namespace davsn::ad {

const Tensor& Var::val() const { return g->value(*this); }

double Var::scalar() const {
    const Tensor& t = val();
    if (t.size() != 1) throw NumericError("scalar() on non-scalar var " + t.shape_str());
    return t[0];
}

Var Graph::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Graph::grad_acc(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_live) {
        n.grad = Tensor(n.value.dims());
        n.grad_live = true;
    }
    return n.grad;
}

Tensor Graph::grad(Var x) const {
    const Node& n = nodes_[static_cast<size_t>(x.id)];
    if (n.grad_live) return n.grad;
    return Tensor(n.value.dims());
}

void Graph::zero_grads() {
    for (auto& n : nodes_) {
        n.grad_live = false;
        n.grad = Tensor();
    }
}

void Graph::backward(Var out) {
    if (out.g != this) throw NumericError("backward target from another graph");
    const Node& o = nodes_[static_cast<size_t>(out.id)];
    if (o.value.size() != 1) throw NumericError("backward target must be scalar");
    grad_acc(out.id)[0] += 1.0;
    for (int id = out.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad_live && n.back) n.back(*this);
    }
}

// ---- op plumbing ----

Var make_op(Graph& g, Tensor value, bool rg, std::function<void(Graph&)> back) {
    Graph::Node n;
    n.value = std::move(value);
    n.requires_grad = rg;
    if (rg) n.back = std::move(back);
    g.nodes_.push_back(std::move(n));
    return Var{&g, static_cast<int>(g.nodes_.size()) - 1};
}

const Tensor& node_val(const Graph& g, int id) { return g.nodes_[static_cast<size_t>(id)].value; }
Tensor& node_grad(Graph& g, int id) { return g.grad_acc(id); }
bool node_grad_live(const Graph& g, int id) { return g.nodes_[static_cast<size_t>(id)].grad_live; }

namespace {

Graph& same_graph(Var a, Var b) {
    if (a.g != b.g) throw NumericError("vars from different graphs");
    return *a.g;
}

bool rg_of(Var v) { return v.g->requires_grad(v); }

void check_chw(const Tensor& t, const char* who) {
    if (t.ndim() != 3) throw NumericError(std::string(who) + ": expected [C,H,W], got " + t.shape_str());
}

} // namespace

// ---- conv2d ----

Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    Graph& g = same_graph(x, w);
    const Tensor& xv = x.val();
    const Tensor& wv = w.val();
    check_chw(xv, "conv2d input");
    if (wv.ndim() != 4) throw NumericError("conv2d weights must be [Cout,Cin,KH,KW]");
    const int cin = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (wv.dim(1) != cin)
        throw NumericError("conv2d channel mismatch: input has " + std::to_string(cin) +
                           ", weights expect " + std::to_string(wv.dim(1)));
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw NumericError("conv2d output would be empty");

    const bool has_bias = b.valid();
    if (has_bias && (b.val().ndim() != 1 || b.val().dim(0) != cout))
        throw NumericError("conv2d bias must be [Cout]");

    Tensor out({cout, Ho, Wo});
    {
        const double* X = xv.data();
        const double* Wt = wv.data();
        double* O = out.data();
        for (int oc = 0; oc < cout; ++oc) {
            double* ob = O + static_cast<int64_t>(oc) * Ho * Wo;
            const double bias = has_bias ? b.val()[oc] : 0.0;
            for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i) ob[i] = bias;
            for (int ic = 0; ic < cin; ++ic) {
                const double* xb = X + static_cast<int64_t>(ic) * H * W;
                for (int ky = 0; ky < kh; ++ky) {
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wval = Wt[((static_cast<int64_t>(oc) * cin + ic) * kh + ky) * kw + kx];
                        if (wval == 0.0) continue;
                        // valid output-x range keeping ix = ox*stride+kx-pad inside [0,W)
                        int ox_lo = 0, ox_hi = Wo - 1;
                        while (ox_lo <= ox_hi && ox_lo * stride + kx - pad < 0) ++ox_lo;
                        while (ox_hi >= ox_lo && ox_hi * stride + kx - pad >= W) --ox_hi;
                        for (int oy = 0; oy < Ho; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= H) continue;
                            const double* xr = xb + static_cast<int64_t>(iy) * W + (kx - pad);
                            double* orow = ob + static_cast<int64_t>(oy) * Wo;
                            if (stride == 1) {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wval * xr[ox];
                            } else {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                    orow[ox] += wval * xr[static_cast<int64_t>(ox) * stride];
                            }
                        }
                    }
                }
            }
        }
    }

    const bool rg = rg_of(x) || rg_of(w) || (has_bias && rg_of(b));
    if (!rg) return make_op(g, std::move(out), false, nullptr);

    const int xid = x.id, wid = w.id, bid = has_bias ? b.id : -1;
    const bool xrg = rg_of(x), wrg = rg_of(w), brg = has_bias && rg_of(b);
    Var outv = make_op(g, std::move(out), true, nullptr);
    const int oid = outv.id;
    g.nodes_[static_cast<size_t>(oid)].back = [=](Graph& gg) {
        const Tensor& go = gg.nodes_[static_cast<size_t>(oid)].grad;
        const Tensor& X = node_val(gg, xid);
        const Tensor& Wt = node_val(gg, wid);
        const int Ho2 = go.dim(1), Wo2 = go.dim(2);
        if (brg) {
            Tensor& gb = node_grad(gg, bid);
            for (int oc = 0; oc < cout; ++oc) {
                const double* gor = go.data() + static_cast<int64_t>(oc) * Ho2 * Wo2;
                double s = 0.0;
                for (int64_t i = 0; i < static_cast<int64_t>(Ho2) * Wo2; ++i) s += gor[i];
                gb[oc] += s;
            }
        }
        if (wrg) {
            Tensor& gw = node_grad(gg, wid);
            for (int oc = 0; oc < cout; ++oc) {
                const double* gob = go.data() + static_cast<int64_t>(oc) * Ho2 * Wo2;
                for (int ic = 0; ic < cin; ++ic) {
                    const double* xb = X.data() + static_cast<int64_t>(ic) * H * W;
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            int ox_lo = 0, ox_hi = Wo2 - 1;
                            while (ox_lo <= ox_hi && ox_lo * stride + kx - pad < 0) ++ox_lo;
                            while (ox_hi >= ox_lo && ox_hi * stride + kx - pad >= W) --ox_hi;
                            double acc = 0.0;
                            for (int oy = 0; oy < Ho2; ++oy) {
                                const int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= H) continue;
                                const double* xr = xb + static_cast<int64_t>(iy) * W + (kx - pad);
                                const double* gor = gob + static_cast<int64_t>(oy) * Wo2;
                                if (stride == 1) {
                                    for (int ox = ox_lo; ox <= ox_hi; ++ox) acc += gor[ox] * xr[ox];
                                } else {
                                    for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                        acc += gor[ox] * xr[static_cast<int64_t>(ox) * stride];
                                }
                            }
                            gw[((static_cast<int64_t>(oc) * cin + ic) * kh + ky) * kw + kx] += acc;
                        }
                    }
                }
            }
        }
        if (xrg) {
            Tensor& gx = node_grad(gg, xid);
            for (int oc = 0; oc < cout; ++oc) {
                const double* gob = go.data() + static_cast<int64_t>(oc) * Ho2 * Wo2;
                for (int ic = 0; ic < cin; ++ic) {
                    double* gxb = gx.data() + static_cast<int64_t>(ic) * H * W;
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            const double wval = Wt[((static_cast<int64_t>(oc) * cin + ic) * kh + ky) * kw + kx];
                            if (wval == 0.0) continue;
                            int ox_lo = 0, ox_hi = Wo2 - 1;
                            while (ox_lo <= ox_hi && ox_lo * stride + kx - pad < 0) ++ox_lo;
                            while (ox_hi >= ox_lo && ox_hi * stride + kx - pad >= W) --ox_hi;
                            for (int oy = 0; oy < Ho2; ++oy) {
                                const int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= H) continue;
                                double* gxr = gxb + static_cast<int64_t>(iy) * W + (kx - pad);
                                const double* gor = gob + static_cast<int64_t>(oy) * Wo2;
                                if (stride == 1) {
                                    for (int ox = ox_lo; ox <= ox_hi; ++ox) gxr[ox] += wval * gor[ox];
                                } else {
                                    for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                        gxr[static_cast<int64_t>(ox) * stride] += wval * gor[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    };
    return outv;
}

// ---- pointwise / structural ops ----

Var leaky_relu(Var x, double slope) {
    Graph& g = *x.g;
    const Tensor& xv = x.val();
    Tensor out(xv.dims());
    for (int64_t i = 0; i < xv.size(); ++i) {
        const double v = xv[i];
        out[i] = v > 0.0 ? v : slope * v;
    }
    if (!rg_of(x)) return make_op(g, std::move(out), false, nullptr);
    const int xid = x.id;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [xid, oid, slope](Graph& gg) {
        const Tensor& go = gg.nodes_[static_cast<size_t>(oid)].grad;
        const Tensor& X = node_val(gg, xid);
        Tensor& gx = node_grad(gg, xid);
        for (int64_t i = 0; i < X.size(); ++i) gx[i] += go[i] * (X[i] > 0.0 ? 1.0 : slope);
    };
    return o;
}

Var upsample_nearest2(Var x) {
    Graph& g = *x.g;
    const Tensor& xv = x.val();
    check_chw(xv, "upsample_nearest2");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y) {
            const double* ir = xv.data() + (static_cast<int64_t>(c) * H + y / 2) * W;
            double* orow = out.data() + (static_cast<int64_t>(c) * 2 * H + y) * 2 * W;
            for (int xq = 0; xq < 2 * W; ++xq) orow[xq] = ir[xq / 2];
        }
    if (!rg_of(x)) return make_op(g, std::move(out), false, nullptr);
    const int xid = x.id;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [xid, oid, C, H, W](Graph& gg) {
        const Tensor& go = gg.nodes_[static_cast<size_t>(oid)].grad;
        Tensor& gx = node_grad(gg, xid);
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < 2 * H; ++y) {
                double* gr = gx.data() + (static_cast<int64_t>(c) * H + y / 2) * W;
                const double* gor = go.data() + (static_cast<int64_t>(c) * 2 * H + y) * 2 * W;
                for (int xq = 0; xq < 2 * W; ++xq) gr[xq / 2] += gor[xq];
            }
    };
    return o;
}

Var concat_channels(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    check_chw(av, "concat_channels");
    check_chw(bv, "concat_channels");
    if (av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
        throw NumericError("concat_channels spatial mismatch");
    const int Ca = av.dim(0), Cb = bv.dim(0), H = av.dim(1), W = av.dim(2);
    Tensor out({Ca + Cb, H, W});
    std::copy(av.data(), av.data() + av.size(), out.data());
    std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
    const bool arg = rg_of(a), brg = rg_of(b);
    if (!arg && !brg) return make_op(g, std::move(out), false, nullptr);
    const int aid = a.id, bid = b.id;
    const int64_t na = av.size(), nb = bv.size();
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [=](Graph& gg) {
        const Tensor& go = gg.nodes_[static_cast<size_t>(oid)].grad;
        if (arg) {
            Tensor& ga = node_grad(gg, aid);
            for (int64_t i = 0; i < na; ++i) ga[i] += go[i];
        }
        if (brg) {
            Tensor& gb = node_grad(gg, bid);
            for (int64_t i = 0; i < nb; ++i) gb[i] += go[na + i];
        }
    };
    return o;
}

Var add(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    if (!av.same_shape(bv)) throw NumericError("add shape mismatch");
    Tensor out(av.dims());
    for (int64_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    const bool arg = rg_of(a), brg = rg_of(b);
    if (!arg && !brg) return make_op(g, std::move(out), false, nullptr);
    const int aid = a.id, bid = b.id;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [=](Graph& gg) {
        const Tensor& go = gg.nodes_[static_cast<size_t>(oid)].grad;
        if (arg) {
            Tensor& ga = node_grad(gg, aid);
            for (int64_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (brg) {
            Tensor& gb = node_grad(gg, bid);
            for (int64_t i = 0; i < go.size(); ++i) gb[i] += go[i];
        }
    };
    return o;
}

Var scale(Var x, double c) {
    Graph& g = *x.g;
    const Tensor& xv = x.val();
    Tensor out(xv.dims());
    for (int64_t i = 0; i < xv.size(); ++i) out[i] = c * xv[i];
    if (!rg_of(x)) return make_op(g, std::move(out), false, nullptr);
    const int xid = x.id;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [xid, oid, c](Graph& gg) {
        const Tensor& go = gg.nodes_[static_cast<size_t>(oid)].grad;
        Tensor& gx = node_grad(gg, xid);
        for (int64_t i = 0; i < go.size(); ++i) gx[i] += c * go[i];
    };
    return o;
}

Var softmax_channels(Var x) {
    Graph& g = *x.g;
    const Tensor& xv = x.val();
    check_chw(xv, "softmax_channels");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int64_t hw = static_cast<int64_t>(H) * W;
    Tensor out(xv.dims());
    for (int64_t p = 0; p < hw; ++p) {
        double m = xv[p];
        for (int c = 1; c < C; ++c) m = std::max(m, xv[c * hw + p]);
        double z = 0.0;
        for (int c = 0; c < C; ++c) {
            const double e = std::exp(xv[c * hw + p] - m);
            out[c * hw + p] = e;
            z += e;
        }
        const double inv = 1.0 / z;
        for (int c = 0; c < C; ++c) out[c * hw + p] *= inv;
    }
    if (!rg_of(x)) return make_op(g, std::move(out), false, nullptr);
    const int xid = x.id;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [xid, oid, C, hw](Graph& gg) {
        const Tensor& go = gg.nodes_[static_cast<size_t>(oid)].grad;
        const Tensor& P = node_val(gg, oid);
        Tensor& gx = node_grad(gg, xid);
        for (int64_t p = 0; p < hw; ++p) {
            double dotv = 0.0;
            for (int c = 0; c < C; ++c) dotv += go[c * hw + p] * P[c * hw + p];
            for (int c = 0; c < C; ++c) gx[c * hw + p] += P[c * hw + p] * (go[c * hw + p] - dotv);
        }
    };
    return o;
}

// ---- warp ----

namespace {

struct BilinearCoord {
    int x0, y0;
    double fx, fy;
    bool valid;
};

inline BilinearCoord bilinear_coord(double sx, double sy, int W, int H) {
    BilinearCoord c{0, 0, 0.0, 0.0, false};
    if (!(sx >= 0.0 && sx <= W - 1.0 && sy >= 0.0 && sy <= H - 1.0)) return c;
    c.valid = true;
    c.x0 = static_cast<int>(std::floor(sx));
    c.y0 = static_cast<int>(std::floor(sy));
    if (c.x0 >= W - 1) { c.x0 = W - 2 >= 0 ? W - 2 : 0; }
    if (c.y0 >= H - 1) { c.y0 = H - 2 >= 0 ? H - 2 : 0; }
    c.fx = sx - c.x0;
    c.fy = sy - c.y0;
    return c;
}

} // namespace

Var warp_bilinear(Var x, const Tensor& flow, double fill, ByteMask* mask) {
    Graph& g = *x.g;
    const Tensor& xv = x.val();
    check_chw(xv, "warp_bilinear");
    if (flow.ndim() != 3 || flow.dim(0) != 2)
        throw NumericError("warp_bilinear flow must be [2,H,W]");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    if (flow.dim(1) != H || flow.dim(2) != W)
        throw NumericError("warp_bilinear: map " + xv.shape_str() + " vs flow " + flow.shape_str());
    const int64_t hw = static_cast<int64_t>(H) * W;

    if (mask) *mask = ByteMask(H, W, 0);
    Tensor out({C, H, W});
    for (int y = 0; y < H; ++y) {
        for (int xq = 0; xq < W; ++xq) {
            const int64_t p = static_cast<int64_t>(y) * W + xq;
            const double sx = xq + flow[p];
            const double sy = y + flow[hw + p];
            const BilinearCoord bc = bilinear_coord(sx, sy, W, H);
            if (!bc.valid) {
                for (int c = 0; c < C; ++c) out[c * hw + p] = fill;
                continue;
            }
            if (mask) mask->v[static_cast<size_t>(p)] = 1;
            const int64_t i00 = static_cast<int64_t>(bc.y0) * W + bc.x0;
            const double w00 = (1.0 - bc.fy) * (1.0 - bc.fx);
            const double w01 = (1.0 - bc.fy) * bc.fx;
            const double w10 = bc.fy * (1.0 - bc.fx);
            const double w11 = bc.fy * bc.fx;
            const int x1off = (W > 1) ? 1 : 0;
            const int y1off = (H > 1) ? W : 0;
            for (int c = 0; c < C; ++c) {
                const double* xb = xv.data() + c * hw;
                out[c * hw + p] = w00 * xb[i00] + w01 * xb[i00 + x1off] +
                                  w10 * xb[i00 + y1off] + w11 * xb[i00 + y1off + x1off];
            }
        }
    }
    if (!rg_of(x)) return make_op(g, std::move(out), false, nullptr);
    const int xid = x.id;
    Tensor flow_copy = flow;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [xid, oid, C, H, W, hw, fl = std::move(flow_copy)](Graph& gg) {
        const Tensor& go = gg.nodes_[static_cast<size_t>(oid)].grad;
        Tensor& gx = node_grad(gg, xid);
        for (int y = 0; y < H; ++y) {
            for (int xq = 0; xq < W; ++xq) {
                const int64_t p = static_cast<int64_t>(y) * W + xq;
                const double sx = xq + fl[p];
                const double sy = y + fl[hw + p];
                const BilinearCoord bc = bilinear_coord(sx, sy, W, H);
                if (!bc.valid) continue;
                const int64_t i00 = static_cast<int64_t>(bc.y0) * W + bc.x0;
                const double w00 = (1.0 - bc.fy) * (1.0 - bc.fx);
                const double w01 = (1.0 - bc.fy) * bc.fx;
                const double w10 = bc.fy * (1.0 - bc.fx);
                const double w11 = bc.fy * bc.fx;
                const int x1off = (W > 1) ? 1 : 0;
                const int y1off = (H > 1) ? W : 0;
                for (int c = 0; c < C; ++c) {
                    const double gup = go[c * hw + p];
                    double* gb = gx.data() + c * hw;
                    gb[i00] += w00 * gup;
                    gb[i00 + x1off] += w01 * gup;
                    gb[i00 + y1off] += w10 * gup;
                    gb[i00 + y1off + x1off] += w11 * gup;
                }
            }
        }
    };
    return o;
}

// ---- scalar-producing ops ----

Var nll_mean(Var p, const LabelMap& labels) {
    Graph& g = *p.g;
    const Tensor& pv = p.val();
    check_chw(pv, "nll_mean");
    const int C = pv.dim(0), H = pv.dim(1), W = pv.dim(2);
    if (labels.height != H || labels.width != W) throw NumericError("nll_mean label shape mismatch");
    const int64_t hw = static_cast<int64_t>(H) * W;
    double acc = 0.0;
    for (int64_t i = 0; i < hw; ++i) {
        const int y = labels.v[static_cast<size_t>(i)];
        if (y >= C) throw DataError("label " + std::to_string(y) + " out of range for C=" + std::to_string(C));
        acc -= std::log(std::max(pv[y * hw + i], 1e-300));
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(hw));
    if (!rg_of(p)) return make_op(g, std::move(out), false, nullptr);
    const int pid = p.id;
    LabelMap lab = labels;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [pid, oid, hw, lab = std::move(lab)](Graph& gg) {
        const double gout = gg.nodes_[static_cast<size_t>(oid)].grad[0];
        const Tensor& P = node_val(gg, pid);
        Tensor& gp = node_grad(gg, pid);
        const double invn = 1.0 / static_cast<double>(hw);
        for (int64_t i = 0; i < hw; ++i) {
            const int y = lab.v[static_cast<size_t>(i)];
            gp[y * hw + i] -= gout * invn / std::max(P[y * hw + i], 1e-300);
        }
    };
    return o;
}

Var gated_l1_mean(Var p, const Tensor& target, const ByteMask& gate, int64_t n_valid) {
    Graph& g = *p.g;
    const Tensor& pv = p.val();
    check_chw(pv, "gated_l1_mean");
    if (!pv.same_shape(target)) throw NumericError("gated_l1_mean shape mismatch");
    const int C = pv.dim(0), H = pv.dim(1), W = pv.dim(2);
    if (gate.height != H || gate.width != W) throw NumericError("gated_l1_mean gate shape mismatch");
    const int64_t hw = static_cast<int64_t>(H) * W;
    double acc = 0.0;
    if (n_valid > 0) {
        for (int64_t i = 0; i < hw; ++i) {
            if (!gate.v[static_cast<size_t>(i)]) continue;
            for (int c = 0; c < C; ++c) acc += std::fabs(pv[c * hw + i] - target[c * hw + i]);
        }
        acc /= static_cast<double>(n_valid);
    }
    Tensor out = Tensor::scalar(acc);
    if (!rg_of(p) || n_valid <= 0) return make_op(g, std::move(out), rg_of(p), nullptr);
    const int pid = p.id;
    Tensor tgt = target;
    ByteMask gt = gate;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [pid, oid, C, hw, n_valid, tgt = std::move(tgt),
                                               gt = std::move(gt)](Graph& gg) {
        const double gout = gg.nodes_[static_cast<size_t>(oid)].grad[0];
        const Tensor& P = node_val(gg, pid);
        Tensor& gp = node_grad(gg, pid);
        const double s = gout / static_cast<double>(n_valid);
        for (int64_t i = 0; i < hw; ++i) {
            if (!gt.v[static_cast<size_t>(i)]) continue;
            for (int c = 0; c < C; ++c) {
                const double d = P[c * hw + i] - tgt[c * hw + i];
                if (d > 0.0)
                    gp[c * hw + i] += s;
                else if (d < 0.0)
                    gp[c * hw + i] -= s;
            }
        }
    };
    return o;
}

Var global_avg_pool_scalar(Var x) {
    const Tensor& xv = x.val();
    check_chw(xv, "global_avg_pool_scalar");
    if (xv.dim(0) != 1) throw NumericError("global_avg_pool_scalar expects a single channel");
    return mean_all(x);
}

Var mean_all(Var x) {
    Graph& g = *x.g;
    const Tensor& xv = x.val();
    double acc = 0.0;
    for (int64_t i = 0; i < xv.size(); ++i) acc += xv[i];
    const double n = static_cast<double>(xv.size());
    Tensor out = Tensor::scalar(acc / n);
    if (!rg_of(x)) return make_op(g, std::move(out), false, nullptr);
    const int xid = x.id;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [xid, oid, n](Graph& gg) {
        const double gout = gg.nodes_[static_cast<size_t>(oid)].grad[0];
        Tensor& gx = node_grad(gg, xid);
        const double s = gout / n;
        for (int64_t i = 0; i < gx.size(); ++i) gx[i] += s;
    };
    return o;
}

Var sum_sq(Var x) {
    Graph& g = *x.g;
    const Tensor& xv = x.val();
    double acc = 0.0;
    for (int64_t i = 0; i < xv.size(); ++i) acc += xv[i] * xv[i];
    Tensor out = Tensor::scalar(acc);
    if (!rg_of(x)) return make_op(g, std::move(out), false, nullptr);
    const int xid = x.id;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [xid, oid](Graph& gg) {
        const double gout = gg.nodes_[static_cast<size_t>(oid)].grad[0];
        const Tensor& X = node_val(gg, xid);
        Tensor& gx = node_grad(gg, xid);
        for (int64_t i = 0; i < X.size(); ++i) gx[i] += 2.0 * gout * X[i];
    };
    return o;
}

Var dot_flat(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    if (av.size() != bv.size()) throw NumericError("dot_flat size mismatch");
    double acc = 0.0;
    for (int64_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    Tensor out = Tensor::scalar(acc);
    const bool arg = rg_of(a), brg = rg_of(b);
    if (!arg && !brg) return make_op(g, std::move(out), false, nullptr);
    const int aid = a.id, bid = b.id;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [=](Graph& gg) {
        const double gout = gg.nodes_[static_cast<size_t>(oid)].grad[0];
        const Tensor& A = node_val(gg, aid);
        const Tensor& B = node_val(gg, bid);
        if (arg) {
            Tensor& ga = node_grad(gg, aid);
            for (int64_t i = 0; i < A.size(); ++i) ga[i] += gout * B[i];
        }
        if (brg) {
            Tensor& gb = node_grad(gg, bid);
            for (int64_t i = 0; i < B.size(); ++i) gb[i] += gout * A[i];
        }
    };
    return o;
}

// ---- scalar arithmetic ----

namespace {

double sval(Var v) { return v.scalar(); }

Var binary_scalar(Var a, Var b, double out, std::function<void(double, double, double, double&, double&)> dfun) {
    Graph& g = same_graph(a, b);
    const bool arg = rg_of(a), brg = rg_of(b);
    if (!arg && !brg) return make_op(g, Tensor::scalar(out), false, nullptr);
    const int aid = a.id, bid = b.id;
    Var o = make_op(g, Tensor::scalar(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [=, dfun = std::move(dfun)](Graph& gg) {
        const double gout = gg.nodes_[static_cast<size_t>(oid)].grad[0];
        double da = 0.0, db = 0.0;
        dfun(node_val(gg, aid)[0], node_val(gg, bid)[0], gout, da, db);
        if (arg) node_grad(gg, aid)[0] += da;
        if (brg) node_grad(gg, bid)[0] += db;
    };
    return o;
}

Var unary_scalar(Var a, double out, std::function<double(double, double)> dfun) {
    Graph& g = *a.g;
    if (!rg_of(a)) return make_op(g, Tensor::scalar(out), false, nullptr);
    const int aid = a.id;
    Var o = make_op(g, Tensor::scalar(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [=, dfun = std::move(dfun)](Graph& gg) {
        const double gout = gg.nodes_[static_cast<size_t>(oid)].grad[0];
        node_grad(gg, aid)[0] += dfun(node_val(gg, aid)[0], gout);
    };
    return o;
}

} // namespace

Var s_add(Var a, Var b) {
    return binary_scalar(a, b, sval(a) + sval(b),
                         [](double, double, double go, double& da, double& db) { da = go; db = go; });
}

Var s_sub(Var a, Var b) {
    return binary_scalar(a, b, sval(a) - sval(b),
                         [](double, double, double go, double& da, double& db) { da = go; db = -go; });
}

Var s_mul(Var a, Var b) {
    return binary_scalar(a, b, sval(a) * sval(b),
                         [](double av, double bv, double go, double& da, double& db) {
                             da = go * bv;
                             db = go * av;
                         });
}

Var s_div(Var a, Var b) {
    const double bv0 = sval(b);
    if (bv0 == 0.0) throw NumericError("s_div by zero");
    return binary_scalar(a, b, sval(a) / bv0,
                         [](double av, double bv, double go, double& da, double& db) {
                             da = go / bv;
                             db = -go * av / (bv * bv);
                         });
}

Var s_log(Var a) {
    const double v = sval(a);
    if (v <= 0.0) throw NumericError("s_log of non-positive value");
    return unary_scalar(a, std::log(v), [](double av, double go) { return go / av; });
}

Var s_sqrt(Var a) {
    const double v = sval(a);
    if (v < 0.0) throw NumericError("s_sqrt of negative value");
    return unary_scalar(a, std::sqrt(v), [](double av, double go) { return go * 0.5 / std::sqrt(av); });
}

namespace {
inline double sigmoid_stable(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}
} // namespace

Var s_sigmoid(Var a) {
    const double y = sigmoid_stable(sval(a));
    return unary_scalar(a, y, [y](double, double go) { return go * y * (1.0 - y); });
}

Var s_clamp(Var a, double lo, double hi) {
    const double v = sval(a);
    const double y = std::min(std::max(v, lo), hi);
    return unary_scalar(a, y, [lo, hi](double av, double go) {
        return (av >= lo && av <= hi) ? go : 0.0;
    });
}

namespace {

Var sig_log_mean(Var s, double eps, bool one_minus) {
    Graph& g = *s.g;
    const Tensor& sv = s.val();
    const double n = static_cast<double>(sv.size());
    double acc = 0.0;
    for (int64_t i = 0; i < sv.size(); ++i) {
        double sig = sigmoid_stable(sv[i]);
        if (one_minus) sig = 1.0 - sig;
        acc += std::log(std::min(std::max(sig, eps), 1.0 - eps));
    }
    Tensor out = Tensor::scalar(acc / n);
    if (!rg_of(s)) return make_op(g, std::move(out), false, nullptr);
    const int sid = s.id;
    Var o = make_op(g, std::move(out), true, nullptr);
    const int oid = o.id;
    g.nodes_[static_cast<size_t>(oid)].back = [sid, oid, eps, one_minus, n](Graph& gg) {
        const double gout = gg.nodes_[static_cast<size_t>(oid)].grad[0];
        const Tensor& S = node_val(gg, sid);
        Tensor& gs = node_grad(gg, sid);
        for (int64_t i = 0; i < S.size(); ++i) {
            const double sig = sigmoid_stable(S[i]);
            const double arg = one_minus ? 1.0 - sig : sig;
            if (arg < eps || arg > 1.0 - eps) continue;  // clamped: zero grad
            // d log(sig)/ds = 1-sig ; d log(1-sig)/ds = -sig
            gs[i] += gout / n * (one_minus ? -sig : (1.0 - sig));
        }
    };
    return o;
}

} // namespace

Var logsig_mean(Var s, double eps) { return sig_log_mean(s, eps, false); }
Var log1msig_mean(Var s, double eps) { return sig_log_mean(s, eps, true); }

} // namespace davsn::ad
