#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "partcom/errors.hpp"
#include "partcom/metrics.hpp"
#include "partcom/rng.hpp"
#include "partcom/tensor.hpp"

using namespace partcom;

namespace {

std::vector<ScoreRecord> random_records(Rng& rng, int k, std::size_t n_known,
                                        std::size_t n_unknown, bool tie_heavy = false) {
    std::vector<ScoreRecord> recs;
    for (std::size_t i = 0; i < n_known + n_unknown; ++i) {
        ScoreRecord r;
        if (i < n_known) {
            r.true_label = 1 + static_cast<int>(rng.uniform_int(k));
            // ~60% correct so both branches of the sweep get exercised
            r.pred_label = rng.uniform() < 0.6 ? r.true_label
                                               : 1 + static_cast<int>(rng.uniform_int(k));
        } else {
            r.true_label = k + 1;
            r.pred_label = 1 + static_cast<int>(rng.uniform_int(k));
        }
        r.confidence = tie_heavy ? std::floor(rng.uniform(-2.0, 2.0) * 4.0) / 4.0
                                 : rng.uniform(-2.0, 2.0);
        recs.push_back(r);
    }
    return recs;
}

std::vector<oracles::Record> to_oracle(const std::vector<ScoreRecord>& recs) {
    std::vector<oracles::Record> out;
    for (const auto& r : recs) out.push_back({r.true_label, r.pred_label, r.confidence});
    return out;
}

}  // namespace

TEST_CASE("oscr: worked six-record example") {
    // 3 knowns all classified correctly at confidences .9/.6/.2, 3 unknowns
    // at .8/.5/.1: every threshold bracket admits one more known before the
    // next false positive, so the staircase area is (1/3)(1/3 + 2/3 + 3/3).
    std::vector<ScoreRecord> recs = {
        {1, 1, 0.9}, {2, 2, 0.6}, {1, 1, 0.2},
        {3, 1, 0.8}, {3, 2, 0.5}, {3, 1, 0.1},
    };
    OscrCurve curve = oscr(recs, 2);
    CHECK(curve.area == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(curve.area == doctest::Approx(oracles::oscr_area(to_oracle(recs), 2)).epsilon(1e-12));

    CHECK(curve.points.front() == std::pair<double, double>(0.0, 0.0));
    CHECK(curve.points.back() == std::pair<double, double>(1.0, 1.0));
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].first >= curve.points[i - 1].first);
        CHECK(curve.points[i].second >= curve.points[i - 1].second);
    }
}

TEST_CASE("oscr: all confidences tied degenerates to one step of height acc") {
    std::vector<ScoreRecord> recs = {
        {1, 1, 0.5}, {2, 2, 0.5}, {1, 2, 0.5}, {2, 2, 0.5},  // 3/4 correct
        {3, 1, 0.5}, {3, 2, 0.5},
    };
    OscrCurve curve = oscr(recs, 2);
    CHECK(curve.area == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(curve.area == doctest::Approx(closed_set_accuracy(recs, 2)).epsilon(1e-15));
    CHECK(curve.area == doctest::Approx(oracles::oscr_area(to_oracle(recs), 2)).epsilon(1e-12));
}

TEST_CASE("oscr: perfect separation scores 1") {
    std::vector<ScoreRecord> recs;
    for (int i = 0; i < 5; ++i) recs.push_back({1 + i % 2, 1 + i % 2, 2.0 + i});
    for (int i = 0; i < 4; ++i) recs.push_back({3, 1, -1.0 - i});
    CHECK(oscr(recs, 2).area == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("oscr: agrees with the brute-force sweep on random record sets") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        bool ties = trial % 2 == 0;
        auto recs = random_records(rng, 3, 8 + rng.uniform_int(20), 4 + rng.uniform_int(16), ties);
        double got = oscr(recs, 3).area;
        double want = oracles::oscr_area(to_oracle(recs), 3);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("oscr: invariant under strictly increasing confidence rescaling") {
    Rng rng(77);
    for (int trial = 0; trial < 150; ++trial) {
        auto recs = random_records(rng, 4, 12 + rng.uniform_int(12), 6 + rng.uniform_int(10),
                                   trial % 3 == 0);
        double base = oscr(recs, 4).area;

        auto affine = recs;
        for (auto& r : affine) r.confidence = 2.0 * r.confidence + 7.0;
        CHECK(oscr(affine, 4).area == base);

        auto squashed = recs;
        for (auto& r : squashed) r.confidence = std::tanh(r.confidence);
        CHECK(oscr(squashed, 4).area == base);
    }
}

TEST_CASE("oscr: bounded by the closed-set accuracy") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        auto recs = random_records(rng, 3, 10 + rng.uniform_int(10), 5 + rng.uniform_int(10),
                                   trial % 2 == 0);
        double area = oscr(recs, 3).area;
        double acc = closed_set_accuracy(recs, 3);
        CHECK(area >= 0.0);
        CHECK(area <= acc + 1e-12);
        CHECK(acc <= 1.0);
    }
}

TEST_CASE("oscr: rejects unusable inputs") {
    std::vector<ScoreRecord> knowns_only = {{1, 1, 0.5}, {2, 2, 0.4}};
    CHECK_THROWS_AS((void)oscr(knowns_only, 2), std::invalid_argument);
    std::vector<ScoreRecord> unknowns_only = {{3, 1, 0.5}};
    CHECK_THROWS_AS((void)oscr(unknowns_only, 2), std::invalid_argument);
    std::vector<ScoreRecord> with_nan = {{1, 1, 0.5}, {3, 1, std::nan("")}};
    CHECK_THROWS_AS((void)oscr(with_nan, 2), std::invalid_argument);
    CHECK_THROWS_AS((void)closed_set_accuracy(unknowns_only, 2), std::invalid_argument);
}

TEST_CASE("predict: picks the most aligned prototype, scale-free") {
    Tensor C = Tensor::from_rows({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}});
    Tensor V = Tensor::from_rows({{0.0, 0.0, 1.0}, {-1.0, 0.0, 0.0}});

    Tensor z = Tensor::from_rows({{0.1, 0.9, 0.05}});
    CHECK(predict_closed(z, C) == 2);
    CHECK(predict_open(z, C, V) == 2);

    Tensor z_scaled = Tensor::from_rows({{0.1 * 37.0, 0.9 * 37.0, 0.05 * 37.0}});
    CHECK(predict_open(z_scaled, C, V) == predict_open(z, C, V));

    Tensor z_virtual = Tensor::from_rows({{0.0, 0.1, 1.0}});
    CHECK(predict_open(z_virtual, C, V) == 3);  // unknown bucket = K + 1
    CHECK(predict_closed(z_virtual, C) == 2);   // closed-set stays in 1..K

    // Exact tie between class row 1 and virtual row 1: lower row index wins,
    // so the sample stays known.
    Tensor z_tie = Tensor::from_rows({{1.0, 0.0, 1.0}});
    CHECK(predict_open(z_tie, C, V) == 1);

    Tensor z_zero = Tensor::zeros(1, 3);
    CHECK_THROWS_AS((void)predict_open(z_zero, C, V), std::invalid_argument);
}

TEST_CASE("predict: matches a direct cosine scan on random banks") {
    Rng rng(5150);
    for (int trial = 0; trial < 50; ++trial) {
        int k = 2 + static_cast<int>(rng.uniform_int(4));
        int d = 4 + static_cast<int>(rng.uniform_int(5));
        auto fill = [&](int rows) {
            std::vector<double> v(rows * d);
            for (auto& x : v) x = rng.normal();
            return Tensor::from_data(rows, d, v);
        };
        Tensor C = fill(k), V = fill(k), z = fill(1);

        auto cosine = [&](const Tensor& bank, int row) {
            double dot = 0, na = 0, nb = 0;
            for (int c = 0; c < d; ++c) {
                dot += z(0, c) * bank(row, c);
                na += z(0, c) * z(0, c);
                nb += bank(row, c) * bank(row, c);
            }
            return dot / std::sqrt(na * nb);
        };
        int best = 0;
        double best_sim = -2.0;
        for (int r = 0; r < 2 * k; ++r) {
            double s = r < k ? cosine(C, r) : cosine(V, r - k);
            if (s > best_sim) {
                best_sim = s;
                best = r;
            }
        }
        int want = best < k ? best + 1 : k + 1;
        CHECK(predict_open(z, C, V) == want);
    }
}

TEST_CASE("margin confidence: prototype hit scores 1, equidistant scores 0") {
    Tensor C = Tensor::from_rows({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}});
    Tensor V = Tensor::from_rows({{0.0, 0.0, 1.0}, {0.0, 0.0, -1.0}});

    Tensor z_hit = Tensor::from_rows({{2.0, 0.0, 0.0}});  // == C row 1 up to scale
    CHECK(margin_confidence(z_hit, C, V) == doctest::Approx(1.0).epsilon(1e-12));

    Tensor z_mid = Tensor::from_rows({{1.0, 0.0, 1.0}});  // tied best on both sides
    CHECK(margin_confidence(z_mid, C, V) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("margin confidence: sign agrees with the open-set decision") {
    Rng rng(808);
    for (int trial = 0; trial < 100; ++trial) {
        int k = 3, d = 6;
        auto fill = [&](int rows) {
            std::vector<double> v(rows * d);
            for (auto& x : v) x = rng.normal();
            return Tensor::from_data(rows, d, v);
        };
        Tensor C = fill(k), V = fill(k), z = fill(1);
        double conf = margin_confidence(z, C, V);
        int pred = predict_open(z, C, V);
        if (conf > 0.0) CHECK(pred <= k);
        if (conf < 0.0) CHECK(pred == k + 1);
    }
}

TEST_CASE("record csv: exact round trip and malformed input errors") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "partcom_metrics_test";
    fs::create_directories(dir);

    std::vector<ScoreRecord> recs = {
        {1, 1, 0.123456789012345678}, {2, 1, -3.25}, {3, 2, 1e-17},
    };
    std::string path = (dir / "records.csv").string();
    write_records_csv(path, recs);
    auto back = read_records_csv(path);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].true_label == recs[i].true_label);
        CHECK(back[i].pred_label == recs[i].pred_label);
        CHECK(back[i].confidence == recs[i].confidence);  // %.17g round-trips
    }

    std::string bad_header = (dir / "bad_header.csv").string();
    std::ofstream(bad_header) << "tru,pred,conf\n1,1,0.5\n";
    CHECK_THROWS_AS((void)read_records_csv(bad_header), ParseError);

    std::string trailing = (dir / "trailing.csv").string();
    std::ofstream(trailing) << "true_label,pred_label,confidence\n1,1,0.5,9\n";
    CHECK_THROWS_AS((void)read_records_csv(trailing), ParseError);

    std::string garbage = (dir / "garbage.csv").string();
    std::ofstream(garbage) << "true_label,pred_label,confidence\n1,x,0.5\n";
    CHECK_THROWS_AS((void)read_records_csv(garbage), ParseError);

    fs::remove_all(dir);
}

TEST_CASE("curve csv: header plus one point per line") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "partcom_metrics_curve";
    fs::create_directories(dir);

    std::vector<ScoreRecord> recs = {
        {1, 1, 0.9}, {2, 2, 0.6}, {1, 1, 0.2},
        {3, 1, 0.8}, {3, 2, 0.5}, {3, 1, 0.1},
    };
    OscrCurve curve = oscr(recs, 2);
    std::string path = (dir / "curve.csv").string();
    write_curve_csv(path, curve);

    std::ifstream f(path);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "fpr,ccr");
    std::size_t n_lines = 0;
    while (std::getline(f, line)) {
        if (!line.empty()) ++n_lines;
    }
    CHECK(n_lines == curve.points.size());

    fs::remove_all(dir);
}
