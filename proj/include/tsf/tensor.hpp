#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "tsf/errors.hpp"

namespace tsf {

// All numeric state is 64-bit and row-major. Rank-2 is the whole surface:
// vectors are 1xN rows, scalars are 1x1.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

namespace detail {

struct TensorNode {
    Matrix value;
    Matrix grad;  // empty until a backward pass touches it
    bool requires_grad = false;

    bool has_grad() const { return grad.size() != 0; }
    Matrix& ensure_grad() {
        if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
        return grad;
    }
};

}  // namespace detail

/// Shared-buffer handle over a dense matrix plus its (optional) gradient.
/// Copies alias the same storage; ops on Tensors record their backward
/// step on the active GradientTape.
class Tensor {
public:
    Tensor() : node_(std::make_shared<detail::TensorNode>()) {}
    explicit Tensor(Matrix value, bool requires_grad = false)
        : node_(std::make_shared<detail::TensorNode>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
        return Tensor(Matrix::Zero(rows, cols), requires_grad);
    }
    static Tensor scalar(double v) { return Tensor(Matrix::Constant(1, 1, v)); }

    Index rows() const { return node_->value.rows(); }
    Index cols() const { return node_->value.cols(); }
    Index size() const { return node_->value.size(); }
    std::array<Index, 2> shape() const { return {rows(), cols()}; }

    const Matrix& value() const { return node_->value; }
    Matrix& value() { return node_->value; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    bool has_grad() const { return node_->has_grad(); }
    const Matrix& grad() const {
        if (!node_->has_grad())
            throw ContractError("tensor grad requested before any backward pass");
        return node_->grad;
    }
    Matrix& grad_ref() { return node_->ensure_grad(); }
    void zero_grad() {
        if (node_->has_grad()) node_->grad.setZero();
    }

    double item() const {
        if (size() != 1) throw ContractError("item() on non-scalar tensor");
        return node_->value(0, 0);
    }

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

/// Ordered record of executed ops. Ops append their backward step during the
/// forward pass; backward() replays the record once, in reverse, so gradients
/// accumulate additively across fan-out.
class GradientTape {
public:
    GradientTape() : prev_(active_) { active_ = this; }
    ~GradientTape() { active_ = prev_; }
    GradientTape(const GradientTape&) = delete;
    GradientTape& operator=(const GradientTape&) = delete;

    static GradientTape* active() { return active_; }

    void record(std::function<void()> backward_step) {
        steps_.push_back(std::move(backward_step));
    }
    std::size_t size() const { return steps_.size(); }

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
    void backward(const Tensor& loss) {
        if (loss.size() != 1)
            throw ContractError("backward: loss must be scalar (got " +
                                std::to_string(loss.rows()) + "x" +
                                std::to_string(loss.cols()) + ")");
        loss.node()->ensure_grad()(0, 0) += 1.0;
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> steps_;
    GradientTape* prev_;
    static thread_local GradientTape* active_;
};

// ---------------------------------------------------------------------------
// Ops. Forward math is Eigen; each op records its own adjoint when a tape is
// active and some input requires a gradient.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);

// Row-vector broadcasts (the only broadcasting in the engine): v is 1xN.
Tensor add_rowvec(const Tensor& a, const Tensor& v);
Tensor mul_rowvec(const Tensor& a, const Tensor& v);

Tensor softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);
Tensor gather_rows(const Tensor& table, const std::vector<int>& indices);

Tensor reshape(const Tensor& a, Index rows, Index cols);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

Tensor gelu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);  // d|x|/dx at 0 is defined as 0

Tensor sum(const Tensor& a);       // 1x1
Tensor mean_all(const Tensor& a);  // 1x1

// Inverted dropout; identity when rate == 0. Draws one uniform per element
// from rng, so results are reproducible for a fixed generator state.
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng);

// Constants used by ops and mirrored in the tests.
inline constexpr double kLayerNormEpsilon = 1e-5;

bool all_finite(const Tensor& a);

}  // namespace tsf
