#include "pime/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace pime::ad {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::leaf(Tensor value) {
    value.check_finite("leaf");
    int id = push(std::move(value), nullptr, "leaf");
    return Var{this, id};
}

int Tape::push(Tensor value, std::function<void(Tape&, const Tensor&)> backprop,
               const char* op_name) {
    value.check_finite(op_name);
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(backprop)});
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: foreign var");
    for (auto& n : nodes_) n.grad = Tensor::zeros_like(n.value);
    Tensor seed = nodes_[loss.id].grad;
    if (seed.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    nodes_[loss.id].grad[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        if (nodes_[i].backprop) nodes_[i].backprop(*this, nodes_[i].grad);
    }
}

namespace {

void accum(Tape& t, int id, const Tensor& delta) {
    Tensor& g = t.grad_mut(id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

}  // namespace

Var matmul(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
        throw std::invalid_argument("matmul: shape mismatch");
    std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = A.at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * B.at(p, j);
        }
    int ai = a.id, bi = b.id;
    Tape* t = a.tape;
    int id = t->push(std::move(out),
                     [ai, bi, m, k, n](Tape& t, const Tensor& g) {
                         const Tensor& A = t.value(ai);
                         const Tensor& B = t.value(bi);
                         Tensor& ga = t.grad_mut(ai);
                         Tensor& gb = t.grad_mut(bi);
                         for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j) {
                                 double gv = g.at(i, j);
                                 if (gv == 0.0) continue;
                                 for (std::size_t p = 0; p < k; ++p) {
                                     ga.at(i, p) += gv * B.at(p, j);
                                     gb.at(p, j) += gv * A.at(i, p);
                                 }
                             }
                     },
                     "matmul");
    return Var{t, id};
}

Var vecmat(Var v, Var m) {
    const Tensor& V = v.value();
    const Tensor& M = m.value();
    if (V.rank() != 1 || M.rank() != 2 || V.size() != M.rows())
        throw std::invalid_argument("vecmat: shape mismatch");
    std::size_t k = M.rows(), n = M.cols();
    Tensor out({n});
    for (std::size_t p = 0; p < k; ++p) {
        double vv = V[p];
        if (vv == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out[j] += vv * M.at(p, j);
    }
    int vi = v.id, mi = m.id;
    Tape* t = v.tape;
    int id = t->push(std::move(out),
                     [vi, mi, k, n](Tape& t, const Tensor& g) {
                         const Tensor& V = t.value(vi);
                         const Tensor& M = t.value(mi);
                         Tensor& gv = t.grad_mut(vi);
                         Tensor& gm = t.grad_mut(mi);
                         for (std::size_t p = 0; p < k; ++p)
                             for (std::size_t j = 0; j < n; ++j) {
                                 gv[p] += g[j] * M.at(p, j);
                                 gm.at(p, j) += g[j] * V[p];
                             }
                     },
                     "vecmat");
    return Var{t, id};
}

namespace {

Var binary_same_shape(Var a, Var b, const char* name,
                      double (*fwd)(double, double),
                      void (*bwd)(double, double, double, double&, double&)) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (!A.same_shape(B)) throw std::invalid_argument(std::string(name) + ": shape mismatch");
    Tensor out(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = fwd(A[i], B[i]);
    int ai = a.id, bi = b.id;
    Tape* t = a.tape;
    int id = t->push(std::move(out),
                     [ai, bi, bwd](Tape& t, const Tensor& g) {
                         const Tensor& A = t.value(ai);
                         const Tensor& B = t.value(bi);
                         Tensor& ga = t.grad_mut(ai);
                         Tensor& gb = t.grad_mut(bi);
                         for (std::size_t i = 0; i < g.size(); ++i)
                             bwd(A[i], B[i], g[i], ga[i], gb[i]);
                     },
                     name);
    return Var{t, id};
}

}  // namespace

Var add(Var a, Var b) {
    return binary_same_shape(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double g, double& ga, double& gb) {
            ga += g;
            gb += g;
        });
}

Var sub(Var a, Var b) {
    return binary_same_shape(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double g, double& ga, double& gb) {
            ga += g;
            gb -= g;
        });
}

Var mul(Var a, Var b) {
    return binary_same_shape(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& ga, double& gb) {
            ga += g * y;
            gb += g * x;
        });
}

Var add_rowvec(Var m, Var v) {
    const Tensor& M = m.value();
    const Tensor& V = v.value();
    if (M.rank() != 2 || V.rank() != 1 || M.cols() != V.size())
        throw std::invalid_argument("add_rowvec: shape mismatch");
    Tensor out(M.shape());
    for (std::size_t r = 0; r < M.rows(); ++r)
        for (std::size_t c = 0; c < M.cols(); ++c) out.at(r, c) = M.at(r, c) + V[c];
    int mi = m.id, vi = v.id;
    Tape* t = m.tape;
    int id = t->push(std::move(out),
                     [mi, vi](Tape& t, const Tensor& g) {
                         Tensor& gm = t.grad_mut(mi);
                         Tensor& gv = t.grad_mut(vi);
                         for (std::size_t r = 0; r < g.rows(); ++r)
                             for (std::size_t c = 0; c < g.cols(); ++c) {
                                 gm.at(r, c) += g.at(r, c);
                                 gv[c] += g.at(r, c);
                             }
                     },
                     "add_rowvec");
    return Var{t, id};
}

Var mul_const(Var a, Tensor c) {
    const Tensor& A = a.value();
    if (!A.same_shape(c)) throw std::invalid_argument("mul_const: shape mismatch");
    Tensor out(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * c[i];
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(std::move(out),
                     [ai, c = std::move(c)](Tape& t, const Tensor& g) {
                         Tensor& ga = t.grad_mut(ai);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c[i];
                     },
                     "mul_const");
    return Var{t, id};
}

Var scale(Var a, double c) {
    const Tensor& A = a.value();
    Tensor out(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * c;
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(std::move(out),
                     [ai, c](Tape& t, const Tensor& g) {
                         Tensor& ga = t.grad_mut(ai);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
                     },
                     "scale");
    return Var{t, id};
}

Var add_scalar(Var a, double c) {
    const Tensor& A = a.value();
    Tensor out(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + c;
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(std::move(out),
                     [ai](Tape& t, const Tensor& g) { accum(t, ai, g); }, "add_scalar");
    return Var{t, id};
}

Var relu(Var a) {
    const Tensor& A = a.value();
    Tensor out(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] > 0.0 ? A[i] : 0.0;
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(std::move(out),
                     [ai](Tape& t, const Tensor& g) {
                         const Tensor& A = t.value(ai);
                         Tensor& ga = t.grad_mut(ai);
                         for (std::size_t i = 0; i < g.size(); ++i)
                             if (A[i] > 0.0) ga[i] += g[i];
                     },
                     "relu");
    return Var{t, id};
}

Var exp_op(Var a) {
    const Tensor& A = a.value();
    Tensor out(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = std::exp(A[i]);
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(out,
                     [ai, out](Tape& t, const Tensor& g) {
                         Tensor& ga = t.grad_mut(ai);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * out[i];
                     },
                     "exp");
    return Var{t, id};
}

Var log_op(Var a) {
    const Tensor& A = a.value();
    Tensor out(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = std::log(A[i]);
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(std::move(out),
                     [ai](Tape& t, const Tensor& g) {
                         const Tensor& A = t.value(ai);
                         Tensor& ga = t.grad_mut(ai);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / A[i];
                     },
                     "log");
    return Var{t, id};
}

Var softmax_vec(Var a) {
    const Tensor& A = a.value();
    if (A.rank() != 1) throw std::invalid_argument("softmax_vec: expects 1-d");
    double mx = A[0];
    for (std::size_t i = 1; i < A.size(); ++i) mx = std::max(mx, A[i]);
    Tensor out(A.shape());
    double z = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) {
        out[i] = std::exp(A[i] - mx);
        z += out[i];
    }
    for (std::size_t i = 0; i < A.size(); ++i) out[i] /= z;
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(out,
                     [ai, out](Tape& t, const Tensor& g) {
                         Tensor& ga = t.grad_mut(ai);
                         double gs = 0.0;
                         for (std::size_t i = 0; i < g.size(); ++i) gs += g[i] * out[i];
                         for (std::size_t i = 0; i < g.size(); ++i)
                             ga[i] += out[i] * (g[i] - gs);
                     },
                     "softmax");
    return Var{t, id};
}

Var sum(Var a) {
    const Tensor& A = a.value();
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(Tensor::scalar(s),
                     [ai](Tape& t, const Tensor& g) {
                         Tensor& ga = t.grad_mut(ai);
                         for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
                     },
                     "sum");
    return Var{t, id};
}

Var dot(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (!A.same_shape(B)) throw std::invalid_argument("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i] * B[i];
    int ai = a.id, bi = b.id;
    Tape* t = a.tape;
    int id = t->push(Tensor::scalar(s),
                     [ai, bi](Tape& t, const Tensor& g) {
                         const Tensor& A = t.value(ai);
                         const Tensor& B = t.value(bi);
                         Tensor& ga = t.grad_mut(ai);
                         Tensor& gb = t.grad_mut(bi);
                         for (std::size_t i = 0; i < A.size(); ++i) {
                             ga[i] += g[0] * B[i];
                             gb[i] += g[0] * A[i];
                         }
                     },
                     "dot");
    return Var{t, id};
}

Var sq_norm(Var a) {
    const Tensor& A = a.value();
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i] * A[i];
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(Tensor::scalar(s),
                     [ai](Tape& t, const Tensor& g) {
                         const Tensor& A = t.value(ai);
                         Tensor& ga = t.grad_mut(ai);
                         for (std::size_t i = 0; i < A.size(); ++i) ga[i] += 2.0 * g[0] * A[i];
                     },
                     "sq_norm");
    return Var{t, id};
}

Var l1_norm(Var a) {
    const Tensor& A = a.value();
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += std::abs(A[i]);
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(Tensor::scalar(s),
                     [ai](Tape& t, const Tensor& g) {
                         const Tensor& A = t.value(ai);
                         Tensor& ga = t.grad_mut(ai);
                         for (std::size_t i = 0; i < A.size(); ++i) {
                             if (A[i] > 0.0)
                                 ga[i] += g[0];
                             else if (A[i] < 0.0)
                                 ga[i] -= g[0];
                         }
                     },
                     "l1_norm");
    return Var{t, id};
}

Var pick(Var a, std::size_t i) {
    const Tensor& A = a.value();
    if (A.rank() != 1 || i >= A.size()) throw std::invalid_argument("pick: index out of range");
    int ai = a.id;
    Tape* t = a.tape;
    int id = t->push(Tensor::scalar(A[i]),
                     [ai, i](Tape& t, const Tensor& g) { t.grad_mut(ai)[i] += g[0]; },
                     "pick");
    return Var{t, id};
}

Var row(Var m, std::size_t r) {
    const Tensor& M = m.value();
    if (M.rank() != 2 || r >= M.rows()) throw std::invalid_argument("row: index out of range");
    std::size_t n = M.cols();
    Tensor out({n});
    for (std::size_t c = 0; c < n; ++c) out[c] = M.at(r, c);
    int mi = m.id;
    Tape* t = m.tape;
    int id = t->push(std::move(out),
                     [mi, r, n](Tape& t, const Tensor& g) {
                         Tensor& gm = t.grad_mut(mi);
                         for (std::size_t c = 0; c < n; ++c) gm.at(r, c) += g[c];
                     },
                     "row");
    return Var{t, id};
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: empty");
    std::size_t n = 0;
    for (const Var& p : parts) n += p.value().size();
    Tensor out({n});
    std::size_t off = 0;
    std::vector<int> ids;
    std::vector<std::size_t> sizes;
    for (const Var& p : parts) {
        const Tensor& P = p.value();
        for (std::size_t i = 0; i < P.size(); ++i) out[off + i] = P[i];
        off += P.size();
        ids.push_back(p.id);
        sizes.push_back(P.size());
    }
    Tape* t = parts[0].tape;
    int id = t->push(std::move(out),
                     [ids, sizes](Tape& t, const Tensor& g) {
                         std::size_t off = 0;
                         for (std::size_t p = 0; p < ids.size(); ++p) {
                             Tensor& gp = t.grad_mut(ids[p]);
                             for (std::size_t i = 0; i < sizes[p]; ++i) gp[i] += g[off + i];
                             off += sizes[p];
                         }
                     },
                     "concat");
    return Var{t, id};
}

}  // namespace pime::ad
