#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "synth.hpp"
#include "tsf/data.hpp"

using namespace tsf;
using tsf::testing::find_dataset;
using tsf::testing::sinusoid_dataset;
using tsf::testing::temp_dir;

namespace {

std::string write_file(const std::string& name, const std::string& content) {
    const std::string path = temp_dir("data") + "/" + name;
    std::ofstream out(path, std::ios::trunc);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_csv keeps file order and shape") {
    const auto path = write_file("small.csv",
                                 "date,a,b\n"
                                 "2020-01-01,1.5,2\n"
                                 "2020-01-02,-3,4.25\n"
                                 "2020-01-03,5,6\n");
    TimeSeriesDataset ds = load_csv(path);
    CHECK(ds.steps() == 3);
    CHECK(ds.channels() == 2);
    CHECK(ds.values.value()(0, 0) == 1.5);
    CHECK(ds.values.value()(1, 1) == 4.25);
    CHECK(ds.values.value()(2, 0) == 5.0);
    CHECK(ds.name == "small");
}

TEST_CASE("load_csv without timestamp column") {
    const auto path = write_file("naked.csv",
                                 "a,b,c\n"
                                 "1,2,3\n"
                                 "4,5,6\n");
    CsvOptions opts;
    opts.timestamp_column = false;
    TimeSeriesDataset ds = load_csv(path, opts);
    CHECK(ds.channels() == 3);
    CHECK(ds.values.value()(1, 2) == 6.0);
}

TEST_CASE("load_csv error contracts name the row") {
    const auto bad_cell = write_file("badcell.csv",
                                     "date,a\n"
                                     "t,1\n"
                                     "t,2\n"
                                     "t,3\n"
                                     "t,4\n"
                                     "t,oops\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_cell), doctest::Contains("row 5"), ParseError);

    const auto ragged = write_file("ragged.csv",
                                   "date,a,b\n"
                                   "t,1,2\n"
                                   "t,3\n");
    CHECK_THROWS_WITH_AS(load_csv(ragged), doctest::Contains("row 2"), ParseError);

    const auto empty = write_file("empty.csv", "");
    CHECK_THROWS_AS(load_csv(empty), ParseError);
    const auto header_only = write_file("header.csv", "date,a\n");
    CHECK_THROWS_AS(load_csv(header_only), ParseError);
    CHECK_THROWS_AS(load_csv("/nonexistent/nowhere.csv"), IoError);
}

TEST_CASE("ETTh1 file has the published shape" *
          doctest::skip(find_dataset("ETTh1.csv").empty())) {
    TimeSeriesDataset ds = load_csv(find_dataset("ETTh1.csv"));
    CHECK(ds.steps() == 14400);
    CHECK(ds.channels() == 7);
}

TEST_CASE("chronological_split ratio arithmetic") {
    TimeSeriesDataset ds;
    ds.values = Tensor::zeros(100, 2);
    const SplitBounds b = chronological_split(ds, {0.6, 0.2, 0.2}, 8, 4);
    CHECK(b.train_end == 60);
    CHECK(b.valid_end == 80);

    TimeSeriesDataset big;
    big.values = Tensor::zeros(14400, 1);
    const SplitBounds b2 = chronological_split(big, {0.6, 0.2, 0.2}, 96, 96);
    CHECK(b2.train_end == 8640);
    CHECK(b2.valid_end == 11520);
}

TEST_CASE("chronological_split rejects bad ratios and short spans") {
    TimeSeriesDataset ds;
    ds.values = Tensor::zeros(10, 1);
    CHECK_THROWS_AS(chronological_split(ds, {0.7, 0.1, 0.2}, 8, 4), ConfigError);
    CHECK_THROWS_AS(chronological_split(ds, {0.5, 0.2, 0.2}, 1, 1), ConfigError);
    CHECK_THROWS_AS(chronological_split(ds, {0.5, -0.2, 0.7}, 1, 1), ConfigError);
}

TEST_CASE("normalizer statistics and round trip") {
    TimeSeriesDataset ds;
    Matrix v(2, 2);
    v << 0.0, 7.5,
         2.0, 7.5;  // second channel constant
    ds.values = Tensor(v);
    ds.split_bounds = {2, 2};
    const Normalizer n = Normalizer::fit(ds);
    CHECK(n.mean(0, 0) == doctest::Approx(1.0));
    CHECK(n.std(0, 0) == doctest::Approx(1.0));
    CHECK(n.std(0, 1) == Normalizer::kStdFloor);

    const Matrix applied = n.apply(v);
    CHECK(applied(0, 0) == doctest::Approx(-1.0));
    CHECK(applied(1, 0) == doctest::Approx(1.0));
    CHECK(applied(0, 1) == doctest::Approx(0.0));

    std::mt19937_64 rng(5);
    std::normal_distribution<double> dist(3.0, 2.5);
    Matrix r(50, 3);
    for (Index i = 0; i < r.rows(); ++i)
        for (Index j = 0; j < r.cols(); ++j) r(i, j) = dist(rng);
    TimeSeriesDataset rds;
    rds.values = Tensor(r);
    rds.split_bounds = {50, 50};
    const Normalizer rn = Normalizer::fit(rds);
    CHECK((rn.invert(rn.apply(r)) - r).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("normalizer fits the training span only") {
    // drifting series: train+test statistics must differ from train-only
    Matrix v(100, 1);
    for (Index t = 0; t < 100; ++t) v(t, 0) = t < 60 ? 0.0 + 0.01 * t : 50.0 + 0.01 * t;
    TimeSeriesDataset ds;
    ds.values = Tensor(v);
    ds.split_bounds = {60, 80};
    const Normalizer train_only = Normalizer::fit(ds, true);
    const Normalizer all_rows = Normalizer::fit(ds, false);
    CHECK(train_only.mean(0, 0) != all_rows.mean(0, 0));
    CHECK(std::abs(train_only.mean(0, 0) - all_rows.mean(0, 0)) > 1.0);
}

TEST_CASE("make_windows phases follow t_last mod P") {
    TimeSeriesDataset ds = sinusoid_dataset(130, 2, 24, 0.0, 3);
    chronological_split(ds, {0.7, 0.15, 0.15}, 8, 4);
    const auto windows = make_windows(ds, Split::train, 8, 4, 24);
    REQUIRE(!windows.empty());
    for (const WindowSample& w : windows) {
        CHECK(w.phase == static_cast<int>(w.t_last % 24));
        CHECK(w.x.rows() == 8);
        CHECK(w.y.rows() == 4);
    }
    // first window ends at absolute step L-1
    CHECK(windows.front().t_last == 7);

    // explicit modulo examples: t_last 100 -> 4, t_last 24 -> 0
    TimeSeriesDataset shifted = ds;
    shifted.start_index = 93;  // first window then has t_last = 100
    const auto w2 = make_windows(shifted, Split::train, 8, 4, 24);
    CHECK(w2.front().t_last == 100);
    CHECK(w2.front().phase == 4);
    shifted.start_index = 17;  // t_last = 24
    const auto w3 = make_windows(shifted, Split::train, 8, 4, 24);
    CHECK(w3.front().t_last == 24);
    CHECK(w3.front().phase == 0);
}

TEST_CASE("windows P steps apart share a phase and cover all phases") {
    TimeSeriesDataset ds = sinusoid_dataset(400, 1, 24, 0.0, 9);
    chronological_split(ds, {0.8, 0.1, 0.1}, 16, 8);
    const auto windows = make_windows(ds, Split::train, 16, 8, 24);
    REQUIRE(windows.size() > 48);
    for (std::size_t k = 0; k + 24 < windows.size(); ++k)
        CHECK(windows[k].phase == windows[k + 24].phase);

    std::set<int> seen;
    for (std::size_t k = 0; k < 24; ++k) seen.insert(windows[k].phase);
    CHECK(seen.size() == 24);  // each phase exactly once per P consecutive windows
}

TEST_CASE("window targets never leak across the split's right edge") {
    TimeSeriesDataset ds = sinusoid_dataset(200, 2, 24, 0.1, 11);
    chronological_split(ds, {0.6, 0.2, 0.2}, 12, 6);
    const Index t_end = ds.split_bounds.train_end;
    const Index v_end = ds.split_bounds.valid_end;

    auto max_target_row = [&](Split split) {
        Index max_row = -1;
        for (const WindowSample& w : make_windows(ds, split, 12, 6, 24))
            max_row = std::max(max_row, static_cast<Index>(w.t_last) + 6);
        return max_row;  // absolute index of the last target row
    };
    CHECK(max_target_row(Split::train) < t_end);
    CHECK(max_target_row(Split::valid) < v_end);
    CHECK(max_target_row(Split::test) < ds.steps());

    // validation targets start exactly at the split edge: lookback reaches back
    const auto valid = make_windows(ds, Split::valid, 12, 6, 24);
    CHECK(valid.front().t_last == t_end - 1);
}

TEST_CASE("make_windows yields empty on too-short spans, errors on bad args") {
    TimeSeriesDataset ds = sinusoid_dataset(50, 1, 24, 0.0, 13);
    ds.split_bounds = {40, 45};  // valid span of 5 rows
    CHECK(make_windows(ds, Split::valid, 30, 20, 24).empty());
    CHECK_THROWS_AS(make_windows(ds, Split::train, 0, 4, 24), ConfigError);
    CHECK_THROWS_AS(make_windows(ds, Split::train, 4, 4, 0), ConfigError);
}

TEST_CASE("stride thins the window sequence") {
    TimeSeriesDataset ds = sinusoid_dataset(200, 1, 24, 0.0, 17);
    chronological_split(ds, {0.8, 0.1, 0.1}, 8, 4);
    const auto dense = make_windows(ds, Split::train, 8, 4, 24, 1);
    const auto sparse = make_windows(ds, Split::train, 8, 4, 24, 4);
    CHECK(sparse.size() == (dense.size() + 3) / 4);
    CHECK(sparse[1].t_last == dense[4].t_last);
}
