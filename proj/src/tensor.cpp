#include "docadv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>

namespace docadv {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const std::string& msg) {
    if (!ok) fail(msg);
}

std::string two_shapes(const char* op, const Shape& a, const Shape& b) {
    std::ostringstream os;
    os << op << ": incompatible shapes " << shape_str(a) << " and " << shape_str(b);
    return os.str();
}

// valid output range [lo, hi) so that o*stride - pad + k stays inside [0, extent)
void conv_bounds(int out_extent, int stride, int pad, int k, int in_extent, int& lo, int& hi) {
    lo = 0;
    while (lo < out_extent && lo * stride - pad + k < 0) ++lo;
    hi = out_extent;
    while (hi > lo && (hi - 1) * stride - pad + k >= in_extent) --hi;
}

}  // namespace

int numel(const Shape& shape) {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    for (int d : shape) require(d > 0, "tensor: nonpositive extent in " + shape_str(shape));
    require(numel(shape) == static_cast<int>(values.size()),
            "tensor: " + shape_str(shape) + " does not hold " + std::to_string(values.size()) +
                " values");
}

Tensor Tensor::zeros(const Shape& s) { return Tensor(s, std::vector<double>(numel(s), 0.0)); }

Tensor Tensor::full(const Shape& s, double value) {
    return Tensor(s, std::vector<double>(numel(s), value));
}

bool Tensor::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Mul: return "mul";
        case Op::Matmul: return "matmul";
        case Op::Conv2d: return "conv2d";
        case Op::Relu: return "relu";
        case Op::AvgPool2d: return "avgpool2d";
        case Op::Flatten: return "flatten";
        case Op::SoftmaxCrossEntropy: return "softmax_crossentropy";
        case Op::ChannelMean: return "channel_mean";
    }
    return "?";
}

Tensor Graph::leaf(Tensor t) {
    t.node_id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{Op::Leaf, {}, {}, t});
    return t;
}

Tensor Graph::forward(Op op, const std::vector<Tensor>& inputs, OpAttrs attrs) {
    require(op != Op::Leaf, "forward: use leaf() to register inputs");
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const Tensor& t : inputs) {
        if (t.node_id) {
            require(*t.node_id >= 0 && *t.node_id < node_count(),
                    "forward: node id from another graph");
            ids.push_back(*t.node_id);
        } else {
            ids.push_back(*leaf(t).node_id);
        }
    }
    Node node{op, std::move(ids), std::move(attrs), Tensor{}};
    node.value = eval(node, {});
    node.value.node_id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    return nodes_.back().value;
}

const Tensor& Graph::value(int node_id) const { return nodes_.at(node_id).value; }

// Computes one node's output from its inputs. When `values` is nonempty it
// supplies per-node tensors (replay path); otherwise the cached node values
// are used.
Tensor Graph::eval(const Node& node, const std::vector<Tensor>& values) const {
    auto in = [&](int slot) -> const Tensor& {
        const int id = node.inputs[slot];
        return values.empty() ? nodes_[id].value : values[id];
    };

    switch (node.op) {
        case Op::Leaf:
            return node.value;

        case Op::Add: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            Tensor out = a;
            if (a.shape == b.shape) {
                for (int i = 0; i < out.size(); ++i) out.values[i] += b.values[i];
            } else if (a.shape.size() == 4 && b.shape.size() == 1 && b.shape[0] == a.shape[1]) {
                // per-channel bias on (N,C,H,W)
                const int C = a.shape[1], HW = a.shape[2] * a.shape[3];
                for (int n = 0; n < a.shape[0]; ++n)
                    for (int c = 0; c < C; ++c) {
                        double* o = out.values.data() + (static_cast<std::size_t>(n) * C + c) * HW;
                        const double bias = b.values[c];
                        for (int i = 0; i < HW; ++i) o[i] += bias;
                    }
            } else if (a.shape.size() == 2 && b.shape.size() == 1 && b.shape[0] == a.shape[1]) {
                const int K = a.shape[1];
                for (int n = 0; n < a.shape[0]; ++n)
                    for (int k = 0; k < K; ++k) out.values[n * K + k] += b.values[k];
            } else {
                fail(two_shapes("add", a.shape, b.shape));
            }
            out.node_id.reset();
            return out;
        }

        case Op::Mul: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            if (b.size() == 1) {
                Tensor out = a;
                const double s = b.values[0];
                for (double& v : out.values) v *= s;
                out.node_id.reset();
                return out;
            }
            require(a.shape == b.shape, two_shapes("mul", a.shape, b.shape));
            Tensor out = a;
            for (int i = 0; i < out.size(); ++i) out.values[i] *= b.values[i];
            out.node_id.reset();
            return out;
        }

        case Op::Matmul: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            require(a.shape.size() == 2 && b.shape.size() == 2 && a.shape[1] == b.shape[0],
                    two_shapes("matmul", a.shape, b.shape));
            const int N = a.shape[0], K = a.shape[1], M = b.shape[1];
            Tensor out = Tensor::zeros({N, M});
            for (int i = 0; i < N; ++i) {
                const double* arow = a.values.data() + static_cast<std::size_t>(i) * K;
                double* orow = out.values.data() + static_cast<std::size_t>(i) * M;
                for (int k = 0; k < K; ++k) {
                    const double av = arow[k];
                    const double* brow = b.values.data() + static_cast<std::size_t>(k) * M;
                    for (int j = 0; j < M; ++j) orow[j] += av * brow[j];
                }
            }
            return out;
        }

        case Op::Conv2d: {
            const Tensor& x = in(0);
            const Tensor& w = in(1);
            require(x.shape.size() == 4 && w.shape.size() == 4,
                    two_shapes("conv2d", x.shape, w.shape));
            const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            const int OC = w.shape[0], KH = w.shape[2], KW = w.shape[3];
            require(w.shape[1] == C, "conv2d: kernel expects " + std::to_string(w.shape[1]) +
                                         " input channels, input " + shape_str(x.shape) +
                                         " has " + std::to_string(C) + " (kernel " +
                                         shape_str(w.shape) + ")");
            const int s = node.attrs.stride, p = node.attrs.pad;
            require(s >= 1, "conv2d: stride must be >= 1");
            const int OH = (H + 2 * p - KH) / s + 1;
            const int OW = (W + 2 * p - KW) / s + 1;
            require(OH >= 1 && OW >= 1, "conv2d: kernel " + shape_str(w.shape) +
                                            " does not fit input " + shape_str(x.shape));
            Tensor out = Tensor::zeros({N, OC, OH, OW});
            for (int n = 0; n < N; ++n)
                for (int oc = 0; oc < OC; ++oc) {
                    double* oplane =
                        out.values.data() + (static_cast<std::size_t>(n) * OC + oc) * OH * OW;
                    for (int c = 0; c < C; ++c) {
                        const double* iplane =
                            x.values.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                        const double* krow =
                            w.values.data() + (static_cast<std::size_t>(oc) * C + c) * KH * KW;
                        for (int kh = 0; kh < KH; ++kh) {
                            int oh_lo, oh_hi;
                            conv_bounds(OH, s, p, kh, H, oh_lo, oh_hi);
                            for (int kw = 0; kw < KW; ++kw) {
                                const double wv = krow[kh * KW + kw];
                                if (wv == 0.0) continue;
                                int ow_lo, ow_hi;
                                conv_bounds(OW, s, p, kw, W, ow_lo, ow_hi);
                                for (int oh = oh_lo; oh < oh_hi; ++oh) {
                                    const double* irow = iplane + (oh * s - p + kh) * W - p + kw;
                                    double* orow = oplane + oh * OW;
                                    for (int ow = ow_lo; ow < ow_hi; ++ow)
                                        orow[ow] += wv * irow[ow * s];
                                }
                            }
                        }
                    }
                }
            return out;
        }

        case Op::Relu: {
            Tensor out = in(0);
            for (double& v : out.values) v = v > 0.0 ? v : 0.0;
            out.node_id.reset();
            return out;
        }

        case Op::AvgPool2d: {
            const Tensor& x = in(0);
            require(x.shape.size() == 4, "avgpool2d: expected rank-4 input, got " +
                                             shape_str(x.shape));
            const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            const int wh = node.attrs.window_h, ww = node.attrs.window_w, s = node.attrs.stride;
            require(wh >= 1 && ww >= 1 && s >= 1 && wh <= H && ww <= W,
                    "avgpool2d: window " + std::to_string(wh) + "x" + std::to_string(ww) +
                        " does not fit input " + shape_str(x.shape));
            const int OH = (H - wh) / s + 1, OW = (W - ww) / s + 1;
            Tensor out = Tensor::zeros({N, C, OH, OW});
            const double inv = 1.0 / (wh * ww);
            for (int nc = 0; nc < N * C; ++nc) {
                const double* iplane = x.values.data() + static_cast<std::size_t>(nc) * H * W;
                double* oplane = out.values.data() + static_cast<std::size_t>(nc) * OH * OW;
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow) {
                        double acc = 0.0;
                        for (int i = 0; i < wh; ++i) {
                            const double* irow = iplane + (oh * s + i) * W + ow * s;
                            for (int j = 0; j < ww; ++j) acc += irow[j];
                        }
                        oplane[oh * OW + ow] = acc * inv;
                    }
            }
            return out;
        }

        case Op::Flatten: {
            const Tensor& x = in(0);
            require(x.shape.size() >= 2, "flatten: expected rank >= 2, got " +
                                             shape_str(x.shape));
            Tensor out = x;
            out.shape = {x.shape[0], numel(x.shape) / x.shape[0]};
            out.node_id.reset();
            return out;
        }

        case Op::SoftmaxCrossEntropy: {
            const Tensor& x = in(0);
            Shape s2 = x.shape.size() == 1 ? Shape{1, x.shape[0]} : x.shape;
            require(s2.size() == 2, "softmax_crossentropy: expected logits of rank 1 or 2, got " +
                                        shape_str(x.shape));
            const int N = s2[0], K = s2[1];
            require(static_cast<int>(node.attrs.labels.size()) == N,
                    "softmax_crossentropy: " + std::to_string(node.attrs.labels.size()) +
                        " labels for batch of " + std::to_string(N));
            double total = 0.0;
            for (int n = 0; n < N; ++n) {
                const double* row = x.values.data() + static_cast<std::size_t>(n) * K;
                const int label = node.attrs.labels[n];
                require(label >= 0 && label < K,
                        "softmax_crossentropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(K) + " classes");
                double m = row[0];
                for (int k = 1; k < K; ++k) m = std::max(m, row[k]);
                double sum = 0.0;
                for (int k = 0; k < K; ++k) sum += std::exp(row[k] - m);
                total += std::log(sum) - (row[label] - m);
            }
            return Tensor({1}, {total / N});
        }

        case Op::ChannelMean: {
            const Tensor& x = in(0);
            require(x.shape.size() == 4, "channel_mean: expected rank-4 input, got " +
                                             shape_str(x.shape));
            const int N = x.shape[0], C = x.shape[1], HW = x.shape[2] * x.shape[3];
            Tensor out = Tensor::zeros(x.shape);
            const double inv = 1.0 / C;
            for (int n = 0; n < N; ++n) {
                const double* ib = x.values.data() + static_cast<std::size_t>(n) * C * HW;
                double* ob = out.values.data() + static_cast<std::size_t>(n) * C * HW;
                for (int i = 0; i < HW; ++i) {
                    double m = 0.0;
                    for (int c = 0; c < C; ++c) m += ib[c * HW + i];
                    m *= inv;
                    for (int c = 0; c < C; ++c) ob[c * HW + i] = m;
                }
            }
            return out;
        }
    }
    fail("forward: unknown op");
}

const std::vector<Tensor>& Graph::backward(int loss_node) {
    require(loss_node >= 0 && loss_node < node_count(), "backward: bad node id");
    require(nodes_[loss_node].value.size() == 1,
            "backward: loss node has shape " + shape_str(nodes_[loss_node].value.shape) +
                ", expected a scalar");

    gradients_.assign(nodes_.size(), Tensor{});
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        gradients_[i] = Tensor::zeros(nodes_[i].value.shape);
    gradients_[loss_node].values[0] = 1.0;

    for (int id = loss_node; id >= 0; --id) {
        const Node& node = nodes_[id];
        if (node.op == Op::Leaf) continue;
        const Tensor& g = gradients_[id];
        bool any = false;
        for (double v : g.values)
            if (v != 0.0) {
                any = true;
                break;
            }
        if (!any) continue;

        auto in = [&](int slot) -> const Tensor& { return nodes_[node.inputs[slot]].value; };
        auto grad = [&](int slot) -> Tensor& { return gradients_[node.inputs[slot]]; };

        switch (node.op) {
            case Op::Leaf:
                break;

            case Op::Add: {
                const Tensor& a = in(0);
                const Tensor& b = in(1);
                Tensor& da = grad(0);
                Tensor& db = grad(1);
                for (int i = 0; i < a.size(); ++i) da.values[i] += g.values[i];
                if (a.shape == b.shape) {
                    for (int i = 0; i < b.size(); ++i) db.values[i] += g.values[i];
                } else if (a.shape.size() == 4) {
                    // bias gradient built in a fresh buffer, added once
                    const int C = a.shape[1], HW = a.shape[2] * a.shape[3];
                    std::vector<double> local(C, 0.0);
                    for (int n = 0; n < a.shape[0]; ++n)
                        for (int c = 0; c < C; ++c) {
                            const double* gp =
                                g.values.data() + (static_cast<std::size_t>(n) * C + c) * HW;
                            double acc = 0.0;
                            for (int i = 0; i < HW; ++i) acc += gp[i];
                            local[c] += acc;
                        }
                    for (int c = 0; c < C; ++c) db.values[c] += local[c];
                } else {
                    const int K = a.shape[1];
                    std::vector<double> local(K, 0.0);
                    for (int n = 0; n < a.shape[0]; ++n)
                        for (int k = 0; k < K; ++k) local[k] += g.values[n * K + k];
                    for (int k = 0; k < K; ++k) db.values[k] += local[k];
                }
                break;
            }

            case Op::Mul: {
                const Tensor& a = in(0);
                const Tensor& b = in(1);
                Tensor& da = grad(0);
                Tensor& db = grad(1);
                if (b.size() == 1 && a.size() != 1) {
                    const double s = b.values[0];
                    double acc = 0.0;
                    for (int i = 0; i < a.size(); ++i) {
                        da.values[i] += g.values[i] * s;
                        acc += g.values[i] * a.values[i];
                    }
                    db.values[0] += acc;
                } else {
                    for (int i = 0; i < a.size(); ++i) {
                        da.values[i] += g.values[i] * b.values[i];
                        db.values[i] += g.values[i] * a.values[i];
                    }
                }
                break;
            }

            case Op::Matmul: {
                const Tensor& a = in(0);
                const Tensor& b = in(1);
                Tensor& da = grad(0);
                Tensor& db = grad(1);
                const int N = a.shape[0], K = a.shape[1], M = b.shape[1];
                for (int i = 0; i < N; ++i)
                    for (int k = 0; k < K; ++k) {
                        const double* brow = b.values.data() + static_cast<std::size_t>(k) * M;
                        const double* grow = g.values.data() + static_cast<std::size_t>(i) * M;
                        double acc = 0.0;
                        for (int j = 0; j < M; ++j) acc += grow[j] * brow[j];
                        da.values[i * K + k] += acc;
                    }
                {
                    std::vector<double> local(static_cast<std::size_t>(K) * M, 0.0);
                    for (int k = 0; k < K; ++k)
                        for (int i = 0; i < N; ++i) {
                            const double av = a.values[i * K + k];
                            const double* grow = g.values.data() + static_cast<std::size_t>(i) * M;
                            double* lrow = local.data() + static_cast<std::size_t>(k) * M;
                            for (int j = 0; j < M; ++j) lrow[j] += av * grow[j];
                        }
                    for (std::size_t i = 0; i < local.size(); ++i) db.values[i] += local[i];
                }
                break;
            }

            case Op::Conv2d: {
                const Tensor& x = in(0);
                const Tensor& w = in(1);
                Tensor& dx = grad(0);
                Tensor& dw = grad(1);
                const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
                const int OC = w.shape[0], KH = w.shape[2], KW = w.shape[3];
                const int s = node.attrs.stride, p = node.attrs.pad;
                const int OH = g.shape[2], OW = g.shape[3];
                std::vector<double> dwlocal(dw.values.size(), 0.0);
                for (int n = 0; n < N; ++n)
                    for (int oc = 0; oc < OC; ++oc) {
                        const double* gplane =
                            g.values.data() + (static_cast<std::size_t>(n) * OC + oc) * OH * OW;
                        for (int c = 0; c < C; ++c) {
                            const double* iplane =
                                x.values.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                            double* dxplane =
                                dx.values.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                            const double* krow =
                                w.values.data() + (static_cast<std::size_t>(oc) * C + c) * KH * KW;
                            double* dkrow =
                                dwlocal.data() + (static_cast<std::size_t>(oc) * C + c) * KH * KW;
                            for (int kh = 0; kh < KH; ++kh) {
                                int oh_lo, oh_hi;
                                conv_bounds(OH, s, p, kh, H, oh_lo, oh_hi);
                                for (int kw = 0; kw < KW; ++kw) {
                                    int ow_lo, ow_hi;
                                    conv_bounds(OW, s, p, kw, W, ow_lo, ow_hi);
                                    const double wv = krow[kh * KW + kw];
                                    double wacc = 0.0;
                                    for (int oh = oh_lo; oh < oh_hi; ++oh) {
                                        const double* irow =
                                            iplane + (oh * s - p + kh) * W - p + kw;
                                        double* dxrow = dxplane + (oh * s - p + kh) * W - p + kw;
                                        const double* gr = gplane + oh * OW;
                                        for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                            const double gv = gr[ow];
                                            wacc += gv * irow[ow * s];
                                            dxrow[ow * s] += gv * wv;
                                        }
                                    }
                                    dkrow[kh * KW + kw] += wacc;
                                }
                            }
                        }
                    }
                for (std::size_t i = 0; i < dwlocal.size(); ++i) dw.values[i] += dwlocal[i];
                break;
            }

            case Op::Relu: {
                const Tensor& x = in(0);
                Tensor& dx = grad(0);
                for (int i = 0; i < x.size(); ++i)
                    if (x.values[i] > 0.0) dx.values[i] += g.values[i];
                break;
            }

            case Op::AvgPool2d: {
                const Tensor& x = in(0);
                Tensor& dx = grad(0);
                const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
                const int wh = node.attrs.window_h, ww = node.attrs.window_w,
                          s = node.attrs.stride;
                const int OH = g.shape[2], OW = g.shape[3];
                const double inv = 1.0 / (wh * ww);
                for (int nc = 0; nc < N * C; ++nc) {
                    const double* gplane = g.values.data() + static_cast<std::size_t>(nc) * OH * OW;
                    double* dxplane = dx.values.data() + static_cast<std::size_t>(nc) * H * W;
                    for (int oh = 0; oh < OH; ++oh)
                        for (int ow = 0; ow < OW; ++ow) {
                            const double gv = gplane[oh * OW + ow] * inv;
                            for (int i = 0; i < wh; ++i) {
                                double* dxrow = dxplane + (oh * s + i) * W + ow * s;
                                for (int j = 0; j < ww; ++j) dxrow[j] += gv;
                            }
                        }
                }
                break;
            }

            case Op::Flatten: {
                Tensor& dx = grad(0);
                for (int i = 0; i < dx.size(); ++i) dx.values[i] += g.values[i];
                break;
            }

            case Op::SoftmaxCrossEntropy: {
                const Tensor& x = in(0);
                Tensor& dx = grad(0);
                const int K = x.shape.size() == 1 ? x.shape[0] : x.shape[1];
                const int N = x.size() / K;
                const double gscale = g.values[0] / N;
                for (int n = 0; n < N; ++n) {
                    const double* row = x.values.data() + static_cast<std::size_t>(n) * K;
                    double* drow = dx.values.data() + static_cast<std::size_t>(n) * K;
                    double m = row[0];
                    for (int k = 1; k < K; ++k) m = std::max(m, row[k]);
                    double sum = 0.0;
                    for (int k = 0; k < K; ++k) sum += std::exp(row[k] - m);
                    for (int k = 0; k < K; ++k) {
                        double p = std::exp(row[k] - m) / sum;
                        if (k == node.attrs.labels[n]) p -= 1.0;
                        drow[k] += gscale * p;
                    }
                }
                break;
            }

            case Op::ChannelMean: {
                const Tensor& x = in(0);
                Tensor& dx = grad(0);
                const int N = x.shape[0], C = x.shape[1], HW = x.shape[2] * x.shape[3];
                const double inv = 1.0 / C;
                for (int n = 0; n < N; ++n) {
                    const double* gb = g.values.data() + static_cast<std::size_t>(n) * C * HW;
                    double* db = dx.values.data() + static_cast<std::size_t>(n) * C * HW;
                    for (int i = 0; i < HW; ++i) {
                        double m = 0.0;
                        for (int c = 0; c < C; ++c) m += gb[c * HW + i];
                        m *= inv;
                        for (int c = 0; c < C; ++c) db[c * HW + i] += m;
                    }
                }
                break;
            }
        }
    }
    return gradients_;
}

Graph::Replay Graph::replay(int loss_node, int leaf_node, int flat_index, double value) const {
    require(leaf_node >= 0 && leaf_node < node_count() && nodes_[leaf_node].op == Op::Leaf,
            "replay: override target must be a leaf");
    std::vector<Tensor> values(nodes_.size());
    Replay out;
    for (std::size_t id = 0; id <= static_cast<std::size_t>(loss_node); ++id) {
        const Node& node = nodes_[id];
        if (node.op == Op::Leaf) {
            values[id] = node.value;
            if (static_cast<int>(id) == leaf_node) values[id].values.at(flat_index) = value;
            continue;
        }
        if (node.op == Op::Relu) {
            const Tensor& x = values[node.inputs[0]];
            for (double v : x.values)
                out.relu_signs.push_back(v > 0.0 ? 1 : (v < 0.0 ? -1 : 0));
        }
        values[id] = eval(node, values);
    }
    out.loss = values[loss_node].values[0];
    return out;
}

double finite_diff_check(Graph& graph, int loss_node, int tensor_node, double step) {
    require(step > 0.0, "finite_diff_check: step must be positive");
    const std::vector<Tensor>& grads = graph.backward(loss_node);
    const Tensor& analytic = grads.at(tensor_node);
    const Tensor& base = graph.value(tensor_node);

    double worst = 0.0;
    for (int i = 0; i < base.size(); ++i) {
        const double v = base.values[i];
        const Graph::Replay plus = graph.replay(loss_node, tensor_node, i, v + step);
        const Graph::Replay minus = graph.replay(loss_node, tensor_node, i, v - step);
        if (plus.relu_signs != minus.relu_signs) continue;  // kink between the two evaluations
        const double central = (plus.loss - minus.loss) / (2.0 * step);
        const double a = analytic.values[i];
        const double err = std::abs(a - central) / std::max(1.0, std::abs(a));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace docadv
