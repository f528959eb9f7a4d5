#include "tsf/tensor.hpp"

#include <cmath>
#include <string>

namespace tsf {

thread_local GradientTape* GradientTape::active_ = nullptr;

namespace {

std::string shape_str(const Tensor& t) {
    return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

bool taped(const Tensor& a) {
    return GradientTape::active() != nullptr && a.requires_grad();
}
bool taped(const Tensor& a, const Tensor& b) {
    return GradientTape::active() != nullptr && (a.requires_grad() || b.requires_grad());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) +
                             " vs " + shape_str(b));
}

void require_rowvec(const Tensor& a, const Tensor& v, const char* op) {
    if (v.rows() != 1 || v.cols() != a.cols())
        throw DimensionError(std::string(op) + ": expected 1x" + std::to_string(a.cols()) +
                             " row vector, got " + shape_str(v));
}

using Node = std::shared_ptr<detail::TensorNode>;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a) +
                             " * " + shape_str(b));
    Tensor out(a.value() * b.value());
    if (taped(a, b)) {
        out.set_requires_grad(true);
        Node an = a.node(), bn = b.node(), on = out.node();
        GradientTape::active()->record([an, bn, on] {
            if (!on->has_grad()) return;
            const Matrix& g = on->grad;
            if (an->requires_grad) an->ensure_grad().noalias() += g * bn->value.transpose();
            if (bn->requires_grad) bn->ensure_grad().noalias() += an->value.transpose() * g;
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out(a.value().transpose());
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on] {
            if (!on->has_grad()) return;
            an->ensure_grad() += on->grad.transpose();
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.value() + b.value());
    if (taped(a, b)) {
        out.set_requires_grad(true);
        Node an = a.node(), bn = b.node(), on = out.node();
        GradientTape::active()->record([an, bn, on] {
            if (!on->has_grad()) return;
            if (an->requires_grad) an->ensure_grad() += on->grad;
            if (bn->requires_grad) bn->ensure_grad() += on->grad;
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.value() - b.value());
    if (taped(a, b)) {
        out.set_requires_grad(true);
        Node an = a.node(), bn = b.node(), on = out.node();
        GradientTape::active()->record([an, bn, on] {
            if (!on->has_grad()) return;
            if (an->requires_grad) an->ensure_grad() += on->grad;
            if (bn->requires_grad) bn->ensure_grad() -= on->grad;
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a.value().cwiseProduct(b.value()));
    if (taped(a, b)) {
        out.set_requires_grad(true);
        Node an = a.node(), bn = b.node(), on = out.node();
        GradientTape::active()->record([an, bn, on] {
            if (!on->has_grad()) return;
            if (an->requires_grad) an->ensure_grad() += on->grad.cwiseProduct(bn->value);
            if (bn->requires_grad) bn->ensure_grad() += on->grad.cwiseProduct(an->value);
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.value() * s);
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on, s] {
            if (!on->has_grad()) return;
            an->ensure_grad() += on->grad * s;
        });
    }
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    require_rowvec(a, v, "add_rowvec");
    Matrix m = a.value();
    m.rowwise() += v.value().row(0);
    Tensor out(std::move(m));
    if (taped(a, v)) {
        out.set_requires_grad(true);
        Node an = a.node(), vn = v.node(), on = out.node();
        GradientTape::active()->record([an, vn, on] {
            if (!on->has_grad()) return;
            if (an->requires_grad) an->ensure_grad() += on->grad;
            if (vn->requires_grad) vn->ensure_grad() += on->grad.colwise().sum();
        });
    }
    return out;
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
    require_rowvec(a, v, "mul_rowvec");
    Matrix m = a.value();
    m.array().rowwise() *= v.value().row(0).array();
    Tensor out(std::move(m));
    if (taped(a, v)) {
        out.set_requires_grad(true);
        Node an = a.node(), vn = v.node(), on = out.node();
        GradientTape::active()->record([an, vn, on] {
            if (!on->has_grad()) return;
            if (an->requires_grad) {
                Matrix g = on->grad;
                g.array().rowwise() *= vn->value.row(0).array();
                an->ensure_grad() += g;
            }
            if (vn->requires_grad)
                vn->ensure_grad() += on->grad.cwiseProduct(an->value).colwise().sum();
        });
    }
    return out;
}

Tensor softmax_rows(const Tensor& a) {
    Matrix y(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        const double m = a.value().row(i).maxCoeff();
        y.row(i) = (a.value().row(i).array() - m).exp();
        y.row(i) /= y.row(i).sum();
    }
    Tensor out(std::move(y));
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on] {
            if (!on->has_grad() || !an->requires_grad) return;
            // dx_i = y_i * (g_i - <g, y>) per row
            Matrix& da = an->ensure_grad();
            for (Index i = 0; i < on->value.rows(); ++i) {
                const double dot = on->grad.row(i).dot(on->value.row(i));
                da.row(i).array() +=
                    on->value.row(i).array() * (on->grad.row(i).array() - dot);
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
    require_rowvec(a, gain, "layer_norm gain");
    require_rowvec(a, bias, "layer_norm bias");
    const Index d = a.cols();
    Matrix xhat(a.rows(), d);
    Matrix inv_std(a.rows(), 1);
    for (Index i = 0; i < a.rows(); ++i) {
        const double mu = a.value().row(i).mean();
        const double var = (a.value().row(i).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
        inv_std(i, 0) = inv;
        xhat.row(i) = (a.value().row(i).array() - mu) * inv;
    }
    Matrix y = xhat;
    y.array().rowwise() *= gain.value().row(0).array();
    y.rowwise() += bias.value().row(0);
    Tensor out(std::move(y));
    if (GradientTape::active() &&
        (a.requires_grad() || gain.requires_grad() || bias.requires_grad())) {
        out.set_requires_grad(true);
        Node an = a.node(), gn = gain.node(), bn = bias.node(), on = out.node();
        GradientTape::active()->record([an, gn, bn, on, xhat, inv_std, d] {
            if (!on->has_grad()) return;
            const Matrix& g = on->grad;
            if (gn->requires_grad)
                gn->ensure_grad() += g.cwiseProduct(xhat).colwise().sum();
            if (bn->requires_grad) bn->ensure_grad() += g.colwise().sum();
            if (an->requires_grad) {
                Matrix& da = an->ensure_grad();
                const double n = static_cast<double>(d);
                for (Index i = 0; i < g.rows(); ++i) {
                    Eigen::RowVectorXd dxhat =
                        g.row(i).cwiseProduct(gn->value.row(0));
                    const double s1 = dxhat.sum();
                    const double s2 = dxhat.dot(xhat.row(i));
                    da.row(i).array() +=
                        inv_std(i, 0) / n *
                        (n * dxhat.array() - s1 - xhat.row(i).array() * s2);
                }
            }
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& indices) {
    const Index r = table.rows();
    for (std::size_t k = 0; k < indices.size(); ++k)
        if (indices[k] < 0 || indices[k] >= r)
            throw IndexError("gather_rows: index " + std::to_string(indices[k]) +
                             " out of range [0, " + std::to_string(r) + ") at position " +
                             std::to_string(k));
    Matrix m(static_cast<Index>(indices.size()), table.cols());
    for (std::size_t k = 0; k < indices.size(); ++k)
        m.row(static_cast<Index>(k)) = table.value().row(indices[k]);
    Tensor out(std::move(m));
    if (taped(table)) {
        out.set_requires_grad(true);
        Node tn = table.node(), on = out.node();
        GradientTape::active()->record([tn, on, indices] {
            if (!on->has_grad()) return;
            Matrix& dt = tn->ensure_grad();  // scatter-add; repeats accumulate
            for (std::size_t k = 0; k < indices.size(); ++k)
                dt.row(indices[k]) += on->grad.row(static_cast<Index>(k));
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, Index rows, Index cols) {
    if (rows * cols != a.size())
        throw DimensionError("reshape: cannot view " + shape_str(a) + " as " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    // Row-major storage makes this a flat re-view.
    Matrix m = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
    Tensor out(std::move(m));
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on] {
            if (!on->has_grad()) return;
            an->ensure_grad() += Eigen::Map<const Matrix>(
                on->grad.data(), an->value.rows(), an->value.cols());
        });
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const Index r = parts[0].rows();
    Index total = 0;
    bool any_grad = false;
    for (const Tensor& p : parts) {
        if (p.rows() != r) throw DimensionError("concat_cols: row count mismatch");
        total += p.cols();
        any_grad = any_grad || p.requires_grad();
    }
    Matrix m(r, total);
    Index off = 0;
    for (const Tensor& p : parts) {
        m.middleCols(off, p.cols()) = p.value();
        off += p.cols();
    }
    Tensor out(std::move(m));
    if (GradientTape::active() && any_grad) {
        out.set_requires_grad(true);
        std::vector<Node> nodes;
        nodes.reserve(parts.size());
        for (const Tensor& p : parts) nodes.push_back(p.node());
        Node on = out.node();
        GradientTape::active()->record([nodes, on] {
            if (!on->has_grad()) return;
            Index off2 = 0;
            for (const Node& pn : nodes) {
                if (pn->requires_grad)
                    pn->ensure_grad() += on->grad.middleCols(off2, pn->value.cols());
                off2 += pn->value.cols();
            }
        });
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const Index c = parts[0].cols();
    Index total = 0;
    bool any_grad = false;
    for (const Tensor& p : parts) {
        if (p.cols() != c) throw DimensionError("concat_rows: column count mismatch");
        total += p.rows();
        any_grad = any_grad || p.requires_grad();
    }
    Matrix m(total, c);
    Index off = 0;
    for (const Tensor& p : parts) {
        m.middleRows(off, p.rows()) = p.value();
        off += p.rows();
    }
    Tensor out(std::move(m));
    if (GradientTape::active() && any_grad) {
        out.set_requires_grad(true);
        std::vector<Node> nodes;
        nodes.reserve(parts.size());
        for (const Tensor& p : parts) nodes.push_back(p.node());
        Node on = out.node();
        GradientTape::active()->record([nodes, on] {
            if (!on->has_grad()) return;
            Index off2 = 0;
            for (const Node& pn : nodes) {
                if (pn->requires_grad)
                    pn->ensure_grad() += on->grad.middleRows(off2, pn->value.rows());
                off2 += pn->value.rows();
            }
        });
    }
    return out;
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tensor gelu(const Tensor& a) {
    // Exact erf form; derivative is Phi(x) + x * phi(x).
    Matrix y = a.value().unaryExpr(
        [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
    Tensor out(std::move(y));
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on] {
            if (!on->has_grad() || !an->requires_grad) return;
            Matrix d = an->value.unaryExpr([](double x) {
                const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                return cdf + x * pdf;
            });
            an->ensure_grad() += on->grad.cwiseProduct(d);
        });
    }
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out(a.value().cwiseMax(0.0));
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on] {
            if (!on->has_grad() || !an->requires_grad) return;
            Matrix d = (an->value.array() > 0.0).cast<double>();
            an->ensure_grad() += on->grad.cwiseProduct(d);
        });
    }
    return out;
}

Tensor abs(const Tensor& a) {
    Tensor out(a.value().cwiseAbs());
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on] {
            if (!on->has_grad() || !an->requires_grad) return;
            // sign(0) = 0: the stated subgradient convention
            Matrix d = an->value.unaryExpr(
                [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
            an->ensure_grad() += on->grad.cwiseProduct(d);
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    Tensor out(Matrix::Constant(1, 1, a.value().sum()));
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on] {
            if (!on->has_grad()) return;
            an->ensure_grad().array() += on->grad(0, 0);
        });
    }
    return out;
}

Tensor mean_all(const Tensor& a) {
    const double n = static_cast<double>(a.size());
    Tensor out(Matrix::Constant(1, 1, a.value().sum() / n));
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on, n] {
            if (!on->has_grad()) return;
            an->ensure_grad().array() += on->grad(0, 0) / n;
        });
    }
    return out;
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ContractError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    if (rate == 0.0) return a;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    Matrix mask(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            mask(i, j) = uniform(rng) < rate ? 0.0 : keep_scale;
    Tensor out(a.value().cwiseProduct(mask));
    if (taped(a)) {
        out.set_requires_grad(true);
        Node an = a.node(), on = out.node();
        GradientTape::active()->record([an, on, mask] {
            if (!on->has_grad() || !an->requires_grad) return;
            an->ensure_grad() += on->grad.cwiseProduct(mask);
        });
    }
    return out;
}

bool all_finite(const Tensor& a) { return a.value().allFinite(); }

}  // namespace tsf
