#pragma once

#include <functional>
#include <vector>

#include "pime/tensor.hpp"

namespace pime::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& value() const;
};

// Single-use reverse-mode tape over a fixed primitive set. Every primitive
// verifies its output is finite and throws NumericalError naming itself
// otherwise.
class Tape {
public:
    Var leaf(Tensor value);

    const Tensor& value(int id) const { return nodes_[id].value; }
    const Tensor& grad(int id) const { return nodes_[id].grad; }
    Tensor& grad_mut(int id) { return nodes_[id].grad; }

    // Seeds d(loss)/d(loss) = 1 and runs reverse accumulation.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    int push(Tensor value, std::function<void(Tape&, const Tensor&)> backprop,
             const char* op_name);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, const Tensor&)> backprop;  // g -> parent grads
    };

    std::vector<Node> nodes_;
};

// ---- primitives ----------------------------------------------------------

Var matmul(Var a, Var b);          // (m,k)x(k,n) -> (m,n)
Var vecmat(Var v, Var m);          // (k)x(k,n) -> (n)
Var add(Var a, Var b);             // same shape
Var add_rowvec(Var m, Var v);      // (r,c) + broadcast (c)
Var sub(Var a, Var b);
Var mul(Var a, Var b);             // elementwise
Var mul_const(Var a, Tensor c);    // elementwise by a non-differentiated tensor
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var relu(Var a);
Var exp_op(Var a);
Var log_op(Var a);                 // requires strictly positive input
Var softmax_vec(Var a);            // 1-d, max-subtracted
Var sum(Var a);                    // -> scalar
Var dot(Var a, Var b);             // 1-d
Var sq_norm(Var a);                // sum of squares -> scalar
Var l1_norm(Var a);                // sum |x| -> scalar, subgradient sign(x)
Var pick(Var a, std::size_t i);    // 1-d element -> scalar
Var row(Var m, std::size_t r);     // matrix row -> vector
Var concat(const std::vector<Var>& parts);  // 1-d concatenation

}  // namespace pime::ad
