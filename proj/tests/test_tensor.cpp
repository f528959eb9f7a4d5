#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "gradcheck.hpp"
#include "tsf/tensor.hpp"

using namespace tsf;
using tsf::testing::finite_difference_check;
using tsf::testing::random_matrix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Index>(rows.size()),
             static_cast<Index>(rows.begin()->size()));
    Index i = 0;
    for (const auto& r : rows) {
        Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
    Matrix m = mat({{2.0, -1.0, 0.5}, {3.0, 4.0, -2.0}, {0.0, 1.0, 7.0}});
    Tensor identity(Matrix::Identity(3, 3));
    Tensor out = matmul(identity, Tensor(m));
    CHECK(out.value() == m);

    Tensor a(mat({{1, 2}, {3, 4}}));
    Tensor b(mat({{0}, {1}}));
    Tensor c = matmul(a, b);
    CHECK(c.value() == mat({{2}, {4}}));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Tensor a(Matrix::Zero(2, 3));
    Tensor b(Matrix::Zero(2, 2));
    CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("matmul gradient matches finite differences") {
    std::mt19937_64 rng(7);
    Tensor a(random_matrix(3, 4, rng), true);
    Tensor b(random_matrix(4, 2, rng), true);

    double loss_value = 0.0;
    {
        GradientTape tape;
        Tensor loss = sum(matmul(a, b));
        loss_value = loss.item();
        tape.backward(loss);
    }
    CHECK(std::isfinite(loss_value));

    auto report = finite_difference_check(
        {a, b}, [&] { return matmul(a, b).value().sum(); });
    CHECK_MESSAGE(report.max_rel_err < 1e-6, report.worst);
}

TEST_CASE("softmax rows: uniform, overflow guard, row sums") {
    Tensor zeros(Matrix::Zero(1, 7));
    Tensor u = softmax_rows(zeros);
    for (Index j = 0; j < 7; ++j) CHECK(u.value()(0, j) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));

    Tensor big(mat({{1000.0, 0.0}}));
    Tensor s = softmax_rows(big);
    CHECK(s.value()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.value()(0, 1) == doctest::Approx(0.0).epsilon(1e-12));

    std::mt19937_64 rng(11);
    Tensor r(random_matrix(5, 9, rng, -50.0, 50.0));
    Tensor y = softmax_rows(r);
    for (Index i = 0; i < y.rows(); ++i) {
        CHECK(std::abs(y.value().row(i).sum() - 1.0) <= 1e-12);
        CHECK(y.value().row(i).minCoeff() >= 0.0);
        // row entropy never exceeds log2(n)
        double h = 0.0;
        for (Index j = 0; j < y.cols(); ++j) {
            const double p = y.value()(i, j);
            if (p > 0.0) h -= p * std::log2(p);
        }
        CHECK(h <= std::log2(static_cast<double>(y.cols())) + 1e-12);
    }
}

TEST_CASE("softmax gradient matches finite differences") {
    std::mt19937_64 rng(13);
    Tensor x(random_matrix(3, 5, rng), true);
    const Matrix probe = random_matrix(3, 5, rng);

    {
        GradientTape tape;
        Tensor loss = sum(mul(softmax_rows(x), Tensor(probe)));
        tape.backward(loss);
    }
    auto report = finite_difference_check({x}, [&] {
        return softmax_rows(x).value().cwiseProduct(probe).sum();
    });
    CHECK_MESSAGE(report.max_rel_err < 1e-6, report.worst);
}

TEST_CASE("layer_norm constant row and two-point standardization") {
    Tensor gain(Matrix::Ones(1, 4));
    Tensor bias(Matrix::Zero(1, 4));
    Tensor constant(Matrix::Constant(1, 4, 3.25));
    Tensor z = layer_norm(constant, gain, bias);
    for (Index j = 0; j < 4; ++j) CHECK(z.value()(0, j) == doctest::Approx(0.0).epsilon(1e-9));

    Tensor g2(Matrix::Ones(1, 2)), b2(Matrix::Zero(1, 2));
    Tensor two(mat({{1.0, 3.0}}));
    Tensor out = layer_norm(two, g2, b2);
    CHECK(out.value()(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(out.value()(0, 1) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm gradient matches finite differences") {
    std::mt19937_64 rng(17);
    Tensor x(random_matrix(4, 6, rng), true);
    Tensor gain(random_matrix(1, 6, rng, 0.5, 1.5), true);
    Tensor bias(random_matrix(1, 6, rng), true);
    const Matrix probe = random_matrix(4, 6, rng);

    {
        GradientTape tape;
        Tensor loss = sum(mul(layer_norm(x, gain, bias), Tensor(probe)));
        tape.backward(loss);
    }
    auto report = finite_difference_check({x, gain, bias}, [&] {
        return layer_norm(x, gain, bias).value().cwiseProduct(probe).sum();
    });
    CHECK_MESSAGE(report.max_rel_err < 1e-5, report.worst);
}

TEST_CASE("gather_rows basics, repeats, and bounds") {
    Tensor table(mat({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}), true);
    Tensor one = gather_rows(table, {1});
    CHECK(one.value() == mat({{4, 5, 6}}));

    CHECK_THROWS_AS(gather_rows(table, {3}), IndexError);
    CHECK_THROWS_AS(gather_rows(table, {-1}), IndexError);

    // repeated index accumulates 2x into the same row
    {
        GradientTape tape;
        Tensor g = gather_rows(table, {2, 2});
        Tensor loss = sum(g);
        tape.backward(loss);
    }
    CHECK(table.grad().row(2).isApprox(Eigen::RowVector3d(2, 2, 2)));
    CHECK(table.grad().row(0).isZero());
    CHECK(table.grad().row(1).isZero());
}

TEST_CASE("gather backward equals dense one-hot matmul gradient") {
    std::mt19937_64 rng(19);
    Tensor table(random_matrix(4, 3, rng), true);
    const std::vector<int> idx = {2, 0, 2};
    const Matrix probe = random_matrix(3, 3, rng);

    {
        GradientTape tape;
        Tensor loss = sum(mul(gather_rows(table, idx), Tensor(probe)));
        tape.backward(loss);
    }

    // oracle: gather == onehot * table, so d/dtable = onehot^T * probe
    Matrix onehot = Matrix::Zero(3, 4);
    for (int k = 0; k < 3; ++k) onehot(k, idx[static_cast<std::size_t>(k)]) = 1.0;
    Matrix expected = onehot.transpose() * probe;
    CHECK(table.grad().isApprox(expected, 1e-12));

    // rows that were never gathered stay untouched
    CHECK(table.grad().row(1).isZero());
    CHECK(table.grad().row(3).isZero());
}

TEST_CASE("backward on simple losses") {
    std::mt19937_64 rng(23);
    Tensor x(random_matrix(3, 4, rng), true);

    {
        GradientTape tape;
        tape.backward(sum(x));
    }
    CHECK(x.grad() == Matrix::Ones(3, 4));

    x.zero_grad();
    {
        GradientTape tape;
        Tensor loss = scale(sum(mul(x, x)), 0.5);
        tape.backward(loss);
    }
    CHECK(x.grad().isApprox(x.value(), 1e-12));
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x(Matrix::Zero(2, 2), true);
    GradientTape tape;
    Tensor y = add(x, x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("fan-out accumulates additively") {
    Tensor x(mat({{1.0, -2.0}}), true);
    {
        GradientTape tape;
        Tensor y = add(x, x);  // dy/dx = 2
        tape.backward(sum(y));
    }
    CHECK(x.grad() == Matrix::Constant(1, 2, 2.0));
}

TEST_CASE("remaining differentiable ops match finite differences") {
    std::mt19937_64 rng(29);
    const Matrix probe = random_matrix(4, 3, rng);
    auto check_unary = [&](const std::function<Tensor(const Tensor&)>& op,
                           const Matrix& init, double tol) {
        Tensor x(init, true);
        {
            GradientTape tape;
            tape.backward(sum(mul(op(x), Tensor(probe))));
        }
        auto report = finite_difference_check({x}, [&] {
            return op(x).value().cwiseProduct(probe).sum();
        });
        CHECK_MESSAGE(report.max_rel_err < tol, report.worst);
    };

    check_unary([](const Tensor& t) { return gelu(t); }, random_matrix(4, 3, rng), 1e-4);
    check_unary([](const Tensor& t) { return transpose(transpose(t)); },
                random_matrix(4, 3, rng), 1e-6);
    check_unary([](const Tensor& t) { return reshape(reshape(t, 2, 6), 4, 3); },
                random_matrix(4, 3, rng), 1e-6);
    check_unary([](const Tensor& t) { return scale(t, -1.75); },
                random_matrix(4, 3, rng), 1e-6);
    // keep inputs away from the relu/abs kinks so central differences are valid
    Matrix away = random_matrix(4, 3, rng);
    away = away.unaryExpr([](double v) { return v + (v >= 0.0 ? 0.2 : -0.2); });
    check_unary([](const Tensor& t) { return relu(t); }, away, 1e-5);
    check_unary([](const Tensor& t) { return tsf::abs(t); }, away, 1e-5);

    Tensor a(random_matrix(3, 4, rng), true);
    Tensor b(random_matrix(3, 4, rng), true);
    Tensor v(random_matrix(1, 4, rng), true);
    const Matrix probe2 = random_matrix(3, 4, rng);
    {
        GradientTape tape;
        Tensor y = add_rowvec(mul(add(a, b), sub(a, b)), v);
        tape.backward(sum(mul(y, Tensor(probe2))));
    }
    auto report = finite_difference_check({a, b, v}, [&] {
        return add_rowvec(mul(add(a, b), sub(a, b)), v)
            .value()
            .cwiseProduct(probe2)
            .sum();
    });
    CHECK_MESSAGE(report.max_rel_err < 1e-5, report.worst);

    Tensor m(random_matrix(3, 4, rng), true);
    Tensor w(random_matrix(1, 4, rng), true);
    {
        GradientTape tape;
        tape.backward(mean_all(mul_rowvec(m, w)));
    }
    auto report2 = finite_difference_check({m, w}, [&] {
        return mul_rowvec(m, w).value().mean();
    });
    CHECK_MESSAGE(report2.max_rel_err < 1e-5, report2.worst);
}

TEST_CASE("concat along both axes with gradients") {
    std::mt19937_64 rng(31);
    Tensor a(random_matrix(2, 3, rng), true);
    Tensor b(random_matrix(2, 2, rng), true);
    const Matrix probe = random_matrix(2, 5, rng);
    {
        GradientTape tape;
        tape.backward(sum(mul(concat_cols({a, b}), Tensor(probe))));
    }
    CHECK(a.grad().isApprox(probe.leftCols(3), 1e-14));
    CHECK(b.grad().isApprox(probe.rightCols(2), 1e-14));

    Tensor c(random_matrix(2, 3, rng), true);
    Tensor d(random_matrix(1, 3, rng), true);
    const Matrix probe2 = random_matrix(3, 3, rng);
    {
        GradientTape tape;
        tape.backward(sum(mul(concat_rows({c, d}), Tensor(probe2))));
    }
    CHECK(c.grad().isApprox(probe2.topRows(2), 1e-14));
    CHECK(d.grad().isApprox(probe2.bottomRows(1), 1e-14));

    CHECK_THROWS_AS(concat_cols({a, Tensor(Matrix::Zero(3, 1))}), DimensionError);
    CHECK_THROWS_AS(concat_rows({a, Tensor(Matrix::Zero(1, 4))}), DimensionError);
}

TEST_CASE("dropout is identity at rate 0 and rescales kept entries") {
    std::mt19937_64 rng(37);
    Tensor x(random_matrix(6, 5, rng), true);
    Tensor same = dropout(x, 0.0, rng);
    CHECK(same.value() == x.value());

    std::mt19937_64 rng_a(41), rng_b(41);
    Tensor d1 = dropout(x, 0.5, rng_a);
    Tensor d2 = dropout(x, 0.5, rng_b);
    CHECK(d1.value() == d2.value());  // same generator state, same mask
    for (Index i = 0; i < d1.rows(); ++i)
        for (Index j = 0; j < d1.cols(); ++j) {
            const double r = d1.value()(i, j);
            CHECK((r == 0.0 || r == doctest::Approx(2.0 * x.value()(i, j))));
        }
    CHECK_THROWS_AS(dropout(x, 1.0, rng), ContractError);
}

TEST_CASE("ops are deterministic on the single-threaded path") {
    std::mt19937_64 rng(43);
    Tensor a(random_matrix(8, 8, rng));
    Tensor b(random_matrix(8, 8, rng));
    Tensor c1 = matmul(softmax_rows(a), b);
    Tensor c2 = matmul(softmax_rows(a), b);
    CHECK(std::memcmp(c1.value().data(), c2.value().data(),
                      sizeof(double) * static_cast<std::size_t>(c1.size())) == 0);
}

TEST_CASE("reshape rejects element-count mismatch") {
    Tensor a(Matrix::Zero(2, 3));
    CHECK_THROWS_AS(reshape(a, 4, 2), DimensionError);
}

TEST_CASE("no recording happens without an active tape") {
    Tensor x(Matrix::Ones(2, 2), true);
    Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
    CHECK_FALSE(x.has_grad());
}
