#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "oracles.hpp"
#include "partcom/errors.hpp"
#include "partcom/rng.hpp"
#include "partcom/shapegen.hpp"

using namespace partcom;

namespace {

std::string temp_path(const char* name) {
    return std::string("/tmp/partcom_test_") + name;
}

double max_norm(const PointCloud& c) {
    double m = 0.0;
    for (const auto& p : c.pts) m = std::max(m, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
    return m;
}

std::array<double, 3> centroid(const PointCloud& c) {
    std::array<double, 3> s{0, 0, 0};
    for (const auto& p : c.pts)
        for (int i = 0; i < 3; ++i) s[i] += p[i];
    for (int i = 0; i < 3; ++i) s[i] /= double(c.size());
    return s;
}

std::vector<oracles::Pt> as_pts(const PointCloud& c) {
    return {c.pts.begin(), c.pts.end()};
}

}  // namespace

TEST_CASE("every catalog family has at least two distinct parts") {
    CHECK(catalog().size() == 10);
    Rng rng(1);
    for (const auto& fam : catalog()) {
        auto prims = fam.recipe(rng);
        std::set<std::string> parts;
        for (const auto& p : prims) parts.insert(p.part);
        INFO(fam.name);
        CHECK(parts.size() >= 2);
    }
}

TEST_CASE("generation is deterministic and normalized") {
    for (const char* fam : {"table", "mug", "airplane"}) {
        auto a = generate_shape(fam, 123, 128);
        auto b = generate_shape(fam, 123, 128);
        REQUIRE(a.size() == 128);
        CHECK(a.pts == b.pts);  // bitwise identical

        auto c = centroid(a);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(c[i]) < 1e-9);
        CHECK(max_norm(a) == doctest::Approx(1.0).epsilon(1e-9));

        auto other = generate_shape(fam, 124, 128);
        CHECK(a.pts != other.pts);
    }
    CHECK_THROWS_AS(generate_shape("no-such-family", 1, 128), std::invalid_argument);
    CHECK_THROWS_AS(generate_shape("table", 1, 32), std::invalid_argument);
}

TEST_CASE("tables put a big share of points on the top slab") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto d = generate_shape_detailed("table", seed, 256);
        const Primitive* top = nullptr;
        for (const auto& p : d.prims)
            if (p.part == "top") top = &p;
        REQUIRE(top != nullptr);
        std::size_t close = 0;
        for (const auto& p : d.cloud.pts) {
            auto local = oracles::to_local_frame({p[0], p[1], p[2]}, d);
            if (oracles::dist_to_primitive(local, *top) < 0.05) ++close;
        }
        INFO("seed ", seed);
        CHECK(double(close) / double(d.cloud.size()) >= 0.2);
    }
}

TEST_CASE("sampled points sit on their recorded primitive") {
    for (const char* fam : {"lamp", "bottle", "chair", "airplane", "stool"}) {
        auto d = generate_shape_detailed(fam, 7, 128);
        REQUIRE(d.point_part.size() == d.cloud.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < d.cloud.size(); ++i) {
            auto local = oracles::to_local_frame(
                {d.cloud.pts[i][0], d.cloud.pts[i][1], d.cloud.pts[i][2]}, d);
            worst = std::max(worst,
                             oracles::dist_to_primitive(local, d.prims[size_t(d.point_part[i])]));
        }
        INFO(fam);
        CHECK(worst < 0.08);  // jitter is sigma=0.01 per coordinate, so ~5 sigma of slack
    }
}

TEST_CASE("single task counts, labels, and disjointness") {
    TaskSpec spec;
    spec.known_classes = {"table", "chair", "lamp", "mug", "bottle"};
    spec.unknown_classes = {"airplane", "bed", "bookshelf", "stool", "bench"};
    spec.train_per_class = 20;
    spec.test_per_class = 10;
    spec.points = 64;
    spec.seed = 3;
    auto data = build_single_task(spec);
    CHECK(data.num_known == 5);
    CHECK(data.train.size() == 100);
    CHECK(data.test.size() == 100);

    int known_test = 0, unknown_test = 0;
    for (const auto& s : data.train) {
        CHECK(s.label >= 1);
        CHECK(s.label <= 5);  // never the unknown label
    }
    for (const auto& s : data.test) (s.label <= 5 ? known_test : unknown_test)++;
    CHECK(known_test == 50);
    CHECK(unknown_test == 50);

    // Seed-determinism and train/test disjointness via exhaustive comparison.
    auto again = build_single_task(spec);
    for (std::size_t i = 0; i < data.train.size(); ++i)
        CHECK(data.train[i].cloud.pts == again.train[i].cloud.pts);
    for (const auto& tr : data.train)
        for (const auto& te : data.test) CHECK(tr.cloud.pts != te.cloud.pts);
}

TEST_CASE("task validation rejects bad specs") {
    TaskSpec spec;
    spec.known_classes = {"table", "table"};
    CHECK_THROWS_AS(build_single_task(spec), ConfigError);  // duplicate exhausts catalog? no:
    spec.known_classes = {"table"};
    spec.unknown_classes = {"table"};
    CHECK_THROWS_AS(build_single_task(spec), ConfigError);
    spec.unknown_classes = {"no-such"};
    CHECK_THROWS_AS(build_single_task(spec), ConfigError);
    spec.unknown_classes.clear();
    spec.train_per_class = 0;
    CHECK_THROWS_AS(build_single_task(spec), ConfigError);
    spec.train_per_class = 1;
    spec.protocol = "weird";
    CHECK_THROWS_AS(build_task(spec), ConfigError);
}

TEST_CASE("cross task marks unknowns with a shifted domain") {
    TaskSpec spec;
    spec.known_classes = {"table", "chair"};
    spec.unknown_classes = {"mug", "lamp"};
    spec.train_per_class = 4;
    spec.test_per_class = 4;
    spec.points = 64;
    auto data = build_cross_task(spec);
    for (const auto& s : data.train) CHECK(s.domain == "A");
    for (const auto& s : data.test) {
        if (s.label <= data.num_known)
            CHECK(s.domain == "A");
        else
            CHECK(s.domain == "B");
    }
}

TEST_CASE("domain shift moves clouds further than seed resampling does") {
    // Mean chamfer between domains should exceed the within-domain value.
    double within = 0.0, across = 0.0;
    int n = 0;
    for (std::uint64_t s = 0; s < 20; s += 2) {
        auto a1 = generate_shape("table", s, 128, default_profile());
        auto a2 = generate_shape("table", s + 1, 128, default_profile());
        auto b1 = generate_shape("table", s + 1000, 128, shifted_profile());
        within += oracles::chamfer(as_pts(a1), as_pts(a2));
        across += oracles::chamfer(as_pts(a1), as_pts(b1));
        ++n;
    }
    CHECK(across / n > within / n);
}

TEST_CASE("rigid_subset_mix keeps cardinality and verbatim membership") {
    auto a = generate_shape("table", 5, 128);
    auto b = generate_shape("mug", 6, 128);
    auto mixed = rigid_subset_mix(a, b, 0.4, 77);
    CHECK(mixed.size() == 128);

    std::set<std::array<double, 3>> pool(a.pts.begin(), a.pts.end());
    pool.insert(b.pts.begin(), b.pts.end());
    for (const auto& p : mixed.pts) CHECK(pool.count(p) == 1);

    // Some points must come from each source.
    std::set<std::array<double, 3>> aset(a.pts.begin(), a.pts.end());
    int from_a = 0;
    for (const auto& p : mixed.pts) from_a += aset.count(p) ? 1 : 0;
    CHECK(from_a > 0);
    CHECK(from_a < 128);

    CHECK_THROWS_AS(rigid_subset_mix(a, b, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(rigid_subset_mix(a, b, 1.0, 1), std::invalid_argument);
    PointCloud small;
    small.pts.assign(4, {0, 0, 0});
    CHECK_THROWS_AS(rigid_subset_mix(a, small, 0.4, 1), std::invalid_argument);
}

TEST_CASE("tiny mix radius swaps close to a single point") {
    auto a = generate_shape("table", 5, 128);
    auto b = generate_shape("mug", 6, 128);
    auto mixed = rigid_subset_mix(a, b, 0.01, 3);
    REQUIRE(mixed.size() == 128);
    std::set<std::array<double, 3>> bset(b.pts.begin(), b.pts.end());
    int not_from_b = 0;
    for (const auto& p : mixed.pts) not_from_b += bset.count(p) ? 0 : 1;
    CHECK(not_from_b >= 1);
    CHECK(not_from_b <= 3);  // a 0.01-ball holds very few points
}

TEST_CASE("mixup task test set is known singles plus mixed unknowns") {
    TaskSpec spec;
    spec.protocol = "confusing_mixup";
    spec.known_classes = {"table", "chair", "mug"};
    spec.train_per_class = 3;
    spec.test_per_class = 4;
    spec.points = 64;
    auto data = build_task(spec);
    int mixed = 0;
    for (const auto& s : data.test) {
        if (s.label == data.num_known + 1) {
            CHECK(s.domain == "mix");
            ++mixed;
        } else {
            CHECK(s.domain == "A");
        }
    }
    CHECK(mixed == 12);  // one slot per known class when no unknown list is given
}

TEST_CASE("cloud files round-trip bit-exactly") {
    auto a = generate_shape("bench", 9, 64);
    const auto path = temp_path("roundtrip.pc");
    write_cloud_file(path, a);
    auto back = read_cloud_file(path);
    CHECK(back.pts == a.pts);
    std::remove(path.c_str());
}

TEST_CASE("cloud parser rejects malformed files with line numbers") {
    const auto path = temp_path("bad.pc");
    auto write = [&](const char* body) {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs(body, f);
        std::fclose(f);
    };

    write("PCV1 2\n0 0 0\n");  // header says 2, body has 1
    CHECK_THROWS_AS(read_cloud_file(path), ParseError);

    write("PCV1 1\n0 nan 0\n");
    CHECK_THROWS_WITH_AS(read_cloud_file(path),
                         doctest::Contains("non-finite coordinate (line 2)"), ParseError);

    write("NOPE 1\n0 0 0\n");
    CHECK_THROWS_AS(read_cloud_file(path), ParseError);

    write("PCV1 1\n0 0 0\n1 1 1\n");
    CHECK_THROWS_AS(read_cloud_file(path), ParseError);

    write("PCV1 1\n0 0 0 9\n");
    CHECK_THROWS_AS(read_cloud_file(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("manifest round-trips and rejects garbage") {
    Manifest m;
    m.K = 3;
    m.samples = {{"a.pc", 1, "A"}, {"b.pc", 4, "mix"}};
    const auto path = temp_path("manifest.json");
    write_manifest(path, m);
    auto back = read_manifest(path);
    CHECK(back.K == 3);
    REQUIRE(back.samples.size() == 2);
    CHECK(back.samples[1].path == "b.pc");
    CHECK(back.samples[1].label == 4);
    CHECK(back.samples[1].domain == "mix");

    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("{\"samples\": 12}", f);
    std::fclose(f);
    CHECK_THROWS_AS(read_manifest(path), ParseError);
    std::remove(path.c_str());
}
