// autodiff.cpp - reverse-mode engine and op implementations

#include "uct/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <unordered_set>

namespace uct::ad {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Var constant(Tensor t, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->is_leaf = true;
    n->trainable = false;
    n->needs_grad = false;
    n->name = std::move(name);
    return n;
}

Var leaf(Tensor t, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->is_leaf = true;
    n->trainable = true;
    n->needs_grad = true;
    n->name = std::move(name);
    return n;
}

static Var make_node(Tensor value, std::vector<Var> parents,
                     std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->needs_grad) n->needs_grad = true;
    if (n->needs_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

// Accumulate g into p->grad, allocating on first touch.
static void accum(const Var& p, long i, double g) {
    p->grad.data[static_cast<std::size_t>(i)] += g;
}

static void ensure_grad(Node& n) {
    if (n.grad.shape != n.value.shape) n.grad = Tensor(n.value.shape);
}

void backward(const Var& root) {
    if (root->value.numel() != 1) throw ShapeError("backward: root must be scalar");
    // Iterative post-order DFS.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->needs_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        ensure_grad(*n);
        std::fill(n->grad.data.begin(), n->grad.data.end(), 0.0);
    }
    root->grad.data[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

static void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw ShapeError(std::string(op) + ": shape mismatch");
}

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i) {
            if (a->needs_grad) accum(a, i, n.grad[i]);
            if (b->needs_grad) accum(b, i, n.grad[i]);
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i) {
            if (a->needs_grad) accum(a, i, n.grad[i]);
            if (b->needs_grad) accum(b, i, -n.grad[i]);
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i) {
            if (a->needs_grad) accum(a, i, n.grad[i] * b->value[i]);
            if (b->needs_grad) accum(b, i, n.grad[i] * a->value[i]);
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] * c;
    return make_node(std::move(out), {a}, [a, c](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i) accum(a, i, n.grad[i] * c);
    });
}

Var add_scalar(const Var& a, double c) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] + c;
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i) accum(a, i, n.grad[i]);
    });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var tanh_op(const Var& a) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = std::tanh(a->value[i]);
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i)
            accum(a, i, n.grad[i] * (1.0 - n.value[i] * n.value[i]));
    });
}

Var sigmoid_op(const Var& a) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a->value[i]));
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i)
            accum(a, i, n.grad[i] * n.value[i] * (1.0 - n.value[i]));
    });
}

Var relu(const Var& a) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i)
            if (a->value[i] > 0.0) accum(a, i, n.grad[i]);
    });
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i)
        out[i] = a->value[i] > 0.0 ? a->value[i] : slope * a->value[i];
    return make_node(std::move(out), {a}, [a, slope](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i)
            accum(a, i, n.grad[i] * (a->value[i] > 0.0 ? 1.0 : slope));
    });
}

Var abs_op(const Var& a) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = std::abs(a->value[i]);
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i) {
            double v = a->value[i];
            if (v > 0.0)
                accum(a, i, n.grad[i]);
            else if (v < 0.0)
                accum(a, i, -n.grad[i]);
            // subgradient 0 at the kink
        }
    });
}

Var square(const Var& a) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = a->value[i] * a->value[i];
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i) accum(a, i, 2.0 * a->value[i] * n.grad[i]);
    });
}

Var log_op(const Var& a) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = std::log(a->value[i]);
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i) accum(a, i, n.grad[i] / a->value[i]);
    });
}

Var pow_scalar(const Var& a, double p) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = std::pow(a->value[i], p);
    return make_node(std::move(out), {a}, [a, p](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i)
            accum(a, i, n.grad[i] * p * std::pow(a->value[i], p - 1.0));
    });
}

Var clamp(const Var& a, double lo, double hi) {
    Tensor out(a->value.shape);
    for (long i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, a->value[i]));
    return make_node(std::move(out), {a}, [a, lo, hi](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i)
            if (a->value[i] > lo && a->value[i] < hi) accum(a, i, n.grad[i]);
    });
}

// ---- reductions ----

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a->value.data) s += v;
    return make_node(Tensor::scalar(s), {a}, [a](Node& n) {
        double g = n.grad[0];
        for (long i = 0; i < a->value.numel(); ++i) accum(a, i, g);
    });
}

Var mean(const Var& a) {
    long n_el = a->value.numel();
    if (n_el == 0) throw InvalidArgument("mean: empty tensor");
    double s = 0.0;
    for (double v : a->value.data) s += v;
    return make_node(Tensor::scalar(s / static_cast<double>(n_el)), {a}, [a, n_el](Node& n) {
        double g = n.grad[0] / static_cast<double>(n_el);
        for (long i = 0; i < n_el; ++i) accum(a, i, g);
    });
}

// ---- shape / gather ----

Var select_items(const Var& a, const std::vector<int>& idx) {
    if (a->value.rank() < 1) throw ShapeError("select_items: rank-0 input");
    long item = a->value.numel() / a->value.dim(0);
    std::vector<int> shape = a->value.shape;
    shape[0] = static_cast<int>(idx.size());
    Tensor out(shape);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        int i = idx[k];
        if (i < 0 || i >= a->value.dim(0)) throw InvalidArgument("select_items: index out of range");
        std::copy_n(a->value.data.begin() + i * item, item, out.data.begin() + k * item);
    }
    return make_node(std::move(out), {a}, [a, idx, item](Node& n) {
        for (std::size_t k = 0; k < idx.size(); ++k)
            for (long j = 0; j < item; ++j)
                accum(a, idx[k] * item + j, n.grad[static_cast<long>(k) * item + j]);
    });
}

Var reshape(const Var& a, std::vector<int> new_shape) {
    if (Tensor::numel_of(new_shape) != a->value.numel())
        throw ShapeError("reshape: element count mismatch");
    Tensor out(std::move(new_shape), a->value.data);
    return make_node(std::move(out), {a}, [a](Node& n) {
        for (long i = 0; i < n.value.numel(); ++i) accum(a, i, n.grad[i]);
    });
}

// ---- conv2d ----

namespace {

struct ConvDims {
    int N, Cin, H, W, Cout, k, stride, pad, Ho, Wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
    if (x.rank() != 4) throw ShapeError("conv2d: input must be NCHW");
    if (w.rank() != 4) throw ShapeError("conv2d: weight must be [Cout,Cin,k,k]");
    ConvDims d;
    d.N = x.dim(0);
    d.Cin = x.dim(1);
    d.H = x.dim(2);
    d.W = x.dim(3);
    d.Cout = w.dim(0);
    d.k = w.dim(2);
    d.stride = stride;
    d.pad = pad;
    if (w.dim(1) != d.Cin) throw ShapeError("conv2d: channel mismatch");
    if (w.dim(3) != d.k) throw ShapeError("conv2d: non-square kernel");
    d.Ho = (d.H + 2 * pad - d.k) / stride + 1;
    d.Wo = (d.W + 2 * pad - d.k) / stride + 1;
    // floor output size, matching the usual conv convention
    if (d.Ho <= 0 || d.Wo <= 0)
        throw ShapeError("conv2d: input size incompatible with kernel/stride/pad");
    return d;
}

// col: [Cin*k*k, Ho*Wo]
void im2col(const double* x, const ConvDims& d, double* col) {
    const int khw = d.k * d.k;
    for (int c = 0; c < d.Cin; ++c) {
        const double* xc = x + static_cast<long>(c) * d.H * d.W;
        for (int ki = 0; ki < d.k; ++ki) {
            for (int kj = 0; kj < d.k; ++kj) {
                double* row = col + static_cast<long>(c * khw + ki * d.k + kj) * d.Ho * d.Wo;
                for (int oi = 0; oi < d.Ho; ++oi) {
                    int ii = oi * d.stride + ki - d.pad;
                    if (ii < 0 || ii >= d.H) {
                        std::fill_n(row + static_cast<long>(oi) * d.Wo, d.Wo, 0.0);
                        continue;
                    }
                    const double* xrow = xc + static_cast<long>(ii) * d.W;
                    double* orow = row + static_cast<long>(oi) * d.Wo;
                    for (int oj = 0; oj < d.Wo; ++oj) {
                        int jj = oj * d.stride + kj - d.pad;
                        orow[oj] = (jj >= 0 && jj < d.W) ? xrow[jj] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_accum(const double* col, const ConvDims& d, double* dx) {
    const int khw = d.k * d.k;
    for (int c = 0; c < d.Cin; ++c) {
        double* xc = dx + static_cast<long>(c) * d.H * d.W;
        for (int ki = 0; ki < d.k; ++ki) {
            for (int kj = 0; kj < d.k; ++kj) {
                const double* row = col + static_cast<long>(c * khw + ki * d.k + kj) * d.Ho * d.Wo;
                for (int oi = 0; oi < d.Ho; ++oi) {
                    int ii = oi * d.stride + ki - d.pad;
                    if (ii < 0 || ii >= d.H) continue;
                    double* xrow = xc + static_cast<long>(ii) * d.W;
                    const double* orow = row + static_cast<long>(oi) * d.Wo;
                    for (int oj = 0; oj < d.Wo; ++oj) {
                        int jj = oj * d.stride + kj - d.pad;
                        if (jj >= 0 && jj < d.W) xrow[jj] += orow[oj];
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    ConvDims d = conv_dims(x->value, w->value, stride, pad);
    if (b->value.numel() != d.Cout) throw ShapeError("conv2d: bias size mismatch");
    const long K = static_cast<long>(d.Cin) * d.k * d.k;
    const long P = static_cast<long>(d.Ho) * d.Wo;
    Tensor out({d.N, d.Cout, d.Ho, d.Wo});
    CMapMat Wm(w->value.data.data(), d.Cout, K);
    std::vector<double> col(static_cast<std::size_t>(K * P));
    for (int n = 0; n < d.N; ++n) {
        im2col(x->value.data.data() + static_cast<long>(n) * d.Cin * d.H * d.W, d, col.data());
        CMapMat Cm(col.data(), K, P);
        MapMat Om(out.data.data() + static_cast<long>(n) * d.Cout * P, d.Cout, P);
        Om.noalias() = Wm * Cm;
        for (int co = 0; co < d.Cout; ++co) Om.row(co).array() += b->value[co];
    }
    return make_node(std::move(out), {x, w, b}, [x, w, b, d, K, P](Node& n) {
        CMapMat Wm(w->value.data.data(), d.Cout, K);
        std::vector<double> col(static_cast<std::size_t>(K * P));
        std::vector<double> dcol(static_cast<std::size_t>(K * P));
        for (int ni = 0; ni < d.N; ++ni) {
            CMapMat Gm(n.grad.data.data() + static_cast<long>(ni) * d.Cout * P, d.Cout, P);
            if (w->needs_grad || b->needs_grad) {
                im2col(x->value.data.data() + static_cast<long>(ni) * d.Cin * d.H * d.W, d,
                       col.data());
                if (w->needs_grad) {
                    CMapMat Cm(col.data(), K, P);
                    MapMat dWm(w->grad.data.data(), d.Cout, K);
                    dWm.noalias() += Gm * Cm.transpose();
                }
                if (b->needs_grad)
                    for (int co = 0; co < d.Cout; ++co) b->grad[co] += Gm.row(co).sum();
            }
            if (x->needs_grad) {
                MapMat dCm(dcol.data(), K, P);
                dCm.noalias() = Wm.transpose() * Gm;
                col2im_accum(dcol.data(), d,
                             x->grad.data.data() + static_cast<long>(ni) * d.Cin * d.H * d.W);
            }
        }
    });
}

Var upsample2x(const Var& x) {
    if (x->value.rank() != 4) throw ShapeError("upsample2x: input must be NCHW");
    int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    Tensor out({N, C, 2 * H, 2 * W});
    for (long nc = 0; nc < static_cast<long>(N) * C; ++nc) {
        const double* src = x->value.data.data() + nc * H * W;
        double* dst = out.data.data() + nc * 4 * H * W;
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                double v = src[i * W + j];
                long base = (2L * i) * (2 * W) + 2 * j;
                dst[base] = v;
                dst[base + 1] = v;
                dst[base + 2 * W] = v;
                dst[base + 2 * W + 1] = v;
            }
    }
    return make_node(std::move(out), {x}, [x, N, C, H, W](Node& n) {
        for (long nc = 0; nc < static_cast<long>(N) * C; ++nc) {
            double* dsrc = x->grad.data.data() + nc * H * W;
            const double* g = n.grad.data.data() + nc * 4 * H * W;
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    long base = (2L * i) * (2 * W) + 2 * j;
                    dsrc[i * W + j] += g[base] + g[base + 1] + g[base + 2 * W] + g[base + 2 * W + 1];
                }
        }
    });
}

Var instance_norm(const Var& x, double eps) {
    if (x->value.rank() != 4) throw ShapeError("instance_norm: input must be NCHW");
    int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    long HW = static_cast<long>(H) * W;
    Tensor out(x->value.shape);
    std::vector<double> inv_std(static_cast<std::size_t>(N) * C);
    for (long nc = 0; nc < static_cast<long>(N) * C; ++nc) {
        const double* src = x->value.data.data() + nc * HW;
        double m = 0.0;
        for (long i = 0; i < HW; ++i) m += src[i];
        m /= static_cast<double>(HW);
        double v = 0.0;
        for (long i = 0; i < HW; ++i) v += (src[i] - m) * (src[i] - m);
        v /= static_cast<double>(HW);
        double is = 1.0 / std::sqrt(v + eps);
        inv_std[static_cast<std::size_t>(nc)] = is;
        double* dst = out.data.data() + nc * HW;
        for (long i = 0; i < HW; ++i) dst[i] = (src[i] - m) * is;
    }
    return make_node(std::move(out), {x}, [x, N, C, HW, inv_std](Node& n) {
        for (long nc = 0; nc < static_cast<long>(N) * C; ++nc) {
            const double* y = n.value.data.data() + nc * HW;
            const double* g = n.grad.data.data() + nc * HW;
            double* dx = x->grad.data.data() + nc * HW;
            double gm = 0.0, gym = 0.0;
            for (long i = 0; i < HW; ++i) {
                gm += g[i];
                gym += g[i] * y[i];
            }
            gm /= static_cast<double>(HW);
            gym /= static_cast<double>(HW);
            double is = inv_std[static_cast<std::size_t>(nc)];
            for (long i = 0; i < HW; ++i) dx[i] += is * (g[i] - gm - y[i] * gym);
        }
    });
}

Var gram(const Var& x) {
    if (x->value.rank() != 4) throw ShapeError("gram: input must be NCHW");
    int N = x->value.dim(0), C = x->value.dim(1);
    long HW = static_cast<long>(x->value.dim(2)) * x->value.dim(3);
    double norm = 1.0 / (static_cast<double>(C) * static_cast<double>(HW));
    Tensor out({N, C, C});
    for (int n = 0; n < N; ++n) {
        CMapMat F(x->value.data.data() + static_cast<long>(n) * C * HW, C, HW);
        MapMat G(out.data.data() + static_cast<long>(n) * C * C, C, C);
        G.noalias() = F * F.transpose() * norm;
    }
    return make_node(std::move(out), {x}, [x, N, C, HW, norm](Node& n) {
        for (int ni = 0; ni < N; ++ni) {
            CMapMat F(x->value.data.data() + static_cast<long>(ni) * C * HW, C, HW);
            CMapMat dG(n.grad.data.data() + static_cast<long>(ni) * C * C, C, C);
            MapMat dF(x->grad.data.data() + static_cast<long>(ni) * C * HW, C, HW);
            dF.noalias() += (dG + dG.transpose()) * F * norm;
        }
    });
}

Var global_avg_pool(const Var& x) {
    if (x->value.rank() != 4) throw ShapeError("global_avg_pool: input must be NCHW");
    int N = x->value.dim(0), C = x->value.dim(1);
    long HW = static_cast<long>(x->value.dim(2)) * x->value.dim(3);
    Tensor out({N, C});
    for (long nc = 0; nc < static_cast<long>(N) * C; ++nc) {
        const double* src = x->value.data.data() + nc * HW;
        double s = 0.0;
        for (long i = 0; i < HW; ++i) s += src[i];
        out[nc] = s / static_cast<double>(HW);
    }
    return make_node(std::move(out), {x}, [x, N, C, HW](Node& n) {
        for (long nc = 0; nc < static_cast<long>(N) * C; ++nc) {
            double g = n.grad[nc] / static_cast<double>(HW);
            double* dx = x->grad.data.data() + nc * HW;
            for (long i = 0; i < HW; ++i) dx[i] += g;
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    if (x->value.rank() != 2 || w->value.rank() != 2) throw ShapeError("linear: rank mismatch");
    int N = x->value.dim(0), C = x->value.dim(1), Out = w->value.dim(0);
    if (w->value.dim(1) != C || b->value.numel() != Out) throw ShapeError("linear: size mismatch");
    Tensor out({N, Out});
    CMapMat Xm(x->value.data.data(), N, C);
    CMapMat Wm(w->value.data.data(), Out, C);
    MapMat Om(out.data.data(), N, Out);
    Om.noalias() = Xm * Wm.transpose();
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < Out; ++o) Om(n, o) += b->value[o];
    return make_node(std::move(out), {x, w, b}, [x, w, b, N, C, Out](Node& n) {
        CMapMat Gm(n.grad.data.data(), N, Out);
        if (x->needs_grad) {
            CMapMat Wm(w->value.data.data(), Out, C);
            MapMat dXm(x->grad.data.data(), N, C);
            dXm.noalias() += Gm * Wm;
        }
        if (w->needs_grad) {
            CMapMat Xm(x->value.data.data(), N, C);
            MapMat dWm(w->grad.data.data(), Out, C);
            dWm.noalias() += Gm.transpose() * Xm;
        }
        if (b->needs_grad)
            for (int o = 0; o < Out; ++o) b->grad[o] += Gm.col(o).sum();
    });
}

Var mse(const Var& a, const Var& b) { return mean(square(sub(a, b))); }
Var l1_mean(const Var& a, const Var& b) { return mean(abs_op(sub(a, b))); }

}  // namespace uct::ad
