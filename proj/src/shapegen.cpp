#include "partcom/shapegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "partcom/errors.hpp"
#include "partcom/rng.hpp"

namespace partcom {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Vec3 = std::array<double, 3>;

double sqdist(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

// Canonical samplers put the distinguished direction on w; this maps
// (u, v, w) onto the primitive's axis by cyclic permutation.
Vec3 orient(const Vec3& c, int axis) {
    switch (axis) {
        case 0: return {c[2], c[0], c[1]};
        case 1: return {c[1], c[2], c[0]};
        default: return c;
    }
}

double vary(Rng& rng, double v) { return v * rng.uniform(0.75, 1.25); }

Primitive box(Rng& rng, std::string part, Vec3 center, Vec3 half) {
    Primitive p;
    p.kind = PrimKind::Box;
    p.part = std::move(part);
    const double s = rng.uniform(0.85, 1.15);
    for (int i = 0; i < 3; ++i) {
        p.center[i] = center[i] * s;
        p.half[i] = vary(rng, half[i]) * s;
    }
    return p;
}

Primitive cylinder(Rng& rng, std::string part, Vec3 center, double radius, double half_height,
                   int axis = 2) {
    Primitive p;
    p.kind = PrimKind::Cylinder;
    p.part = std::move(part);
    p.center = center;
    p.radius = vary(rng, radius);
    p.half_height = vary(rng, half_height);
    p.axis = axis;
    return p;
}

Primitive disk(Rng& rng, std::string part, Vec3 center, double radius, int axis = 2) {
    Primitive p;
    p.kind = PrimKind::Disk;
    p.part = std::move(part);
    p.center = center;
    p.radius = vary(rng, radius);
    p.axis = axis;
    return p;
}

Primitive cap(Rng& rng, std::string part, Vec3 center, double radius, double cap_cos,
              int axis = 2) {
    Primitive p;
    p.kind = PrimKind::SphereCap;
    p.part = std::move(part);
    p.center = center;
    p.radius = vary(rng, radius);
    p.cap_cos = cap_cos;
    p.axis = axis;
    return p;
}

// --- family recipes ---------------------------------------------------------

std::vector<Primitive> make_table(Rng& rng) {
    std::vector<Primitive> v;
    v.push_back(box(rng, "top", {0, 0, 0.5}, {0.5, 0.35, 0.02}));
    const double lx = v[0].half[0] - 0.07, ly = v[0].half[1] - 0.07;
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0})
            v.push_back(box(rng, "leg", {sx * lx, sy * ly, 0.25}, {0.028, 0.028, 0.24}));
    return v;
}

std::vector<Primitive> make_chair(Rng& rng) {
    std::vector<Primitive> v;
    v.push_back(box(rng, "seat", {0, 0, 0.3}, {0.24, 0.24, 0.02}));
    v.push_back(box(rng, "back", {0, -0.22, 0.55}, {0.24, 0.02, 0.24}));
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0})
            v.push_back(box(rng, "leg", {sx * 0.2, sy * 0.2, 0.14}, {0.02, 0.02, 0.14}));
    return v;
}

std::vector<Primitive> make_lamp(Rng& rng) {
    std::vector<Primitive> v;
    v.push_back(disk(rng, "base", {0, 0, 0.0}, 0.2));
    v.push_back(cylinder(rng, "pole", {0, 0, 0.35}, 0.025, 0.34));
    v.push_back(cap(rng, "shade", {0, 0, 0.72}, 0.24, 0.15));
    return v;
}

std::vector<Primitive> make_airplane(Rng& rng) {
    std::vector<Primitive> v;
    v.push_back(cylinder(rng, "fuselage", {0, 0, 0.3}, 0.08, 0.45, 0));
    v.push_back(box(rng, "wing", {0, 0, 0.3}, {0.08, 0.5, 0.015}));
    v.push_back(box(rng, "tail", {-0.42, 0, 0.4}, {0.04, 0.16, 0.1}));
    return v;
}

std::vector<Primitive> make_mug(Rng& rng) {
    std::vector<Primitive> v;
    v.push_back(cylinder(rng, "body", {0, 0, 0.22}, 0.18, 0.22));
    v.push_back(disk(rng, "bottom", {0, 0, 0.0}, 0.18));
    v.push_back(box(rng, "handle", {0.24, 0, 0.24}, {0.02, 0.05, 0.12}));
    return v;
}

std::vector<Primitive> make_bed(Rng& rng) {
    std::vector<Primitive> v;
    v.push_back(box(rng, "mattress", {0, 0, 0.2}, {0.45, 0.3, 0.06}));
    v.push_back(box(rng, "headboard", {-0.46, 0, 0.32}, {0.02, 0.3, 0.2}));
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0})
            v.push_back(box(rng, "leg", {sx * 0.4, sy * 0.25, 0.06}, {0.03, 0.03, 0.07}));
    return v;
}

std::vector<Primitive> make_bookshelf(Rng& rng) {
    std::vector<Primitive> v;
    for (double sx : {-1.0, 1.0})
        v.push_back(box(rng, "side", {sx * 0.3, 0, 0.45}, {0.02, 0.18, 0.45}));
    for (double z : {0.08, 0.33, 0.58, 0.83})
        v.push_back(box(rng, "shelf", {0, 0, z}, {0.28, 0.17, 0.015}));
    v.push_back(box(rng, "back", {0, -0.17, 0.45}, {0.3, 0.01, 0.45}));
    return v;
}

// A chair without the back: same seat and leg geometry, so the family sits
// right at the chair class's boundary.
std::vector<Primitive> make_stool(Rng& rng) {
    std::vector<Primitive> v;
    v.push_back(box(rng, "seat", {0, 0, 0.3}, {0.24, 0.24, 0.02}));
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0})
            v.push_back(box(rng, "leg", {sx * 0.2, sy * 0.2, 0.14}, {0.02, 0.02, 0.14}));
    return v;
}

// Mug-proportioned body and bottom; only the neck-and-cap replaces the
// handle, keeping the family adjacent to the mug class.
std::vector<Primitive> make_bottle(Rng& rng) {
    std::vector<Primitive> v;
    v.push_back(cylinder(rng, "body", {0, 0, 0.26}, 0.15, 0.26));
    v.push_back(disk(rng, "bottom", {0, 0, 0.0}, 0.15));
    v.push_back(cylinder(rng, "neck", {0, 0, 0.6}, 0.05, 0.08));
    v.push_back(cap(rng, "cap", {0, 0, 0.69}, 0.06, 0.0));
    return v;
}

// A narrow, low table: identical top-plus-four-legs structure, distinguished
// from the table class only by aspect ratio and height.
std::vector<Primitive> make_bench(Rng& rng) {
    std::vector<Primitive> v;
    v.push_back(box(rng, "seat", {0, 0, 0.35}, {0.5, 0.15, 0.02}));
    const double lx = v[0].half[0] - 0.07, ly = v[0].half[1] - 0.05;
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0})
            v.push_back(box(rng, "leg", {sx * lx, sy * ly, 0.17}, {0.028, 0.028, 0.17}));
    return v;
}

std::uint64_t derive_seed(std::uint64_t base, const char* tag, std::uint64_t cls,
                          std::uint64_t idx) {
    std::uint64_t h = fnv1a64(tag);
    h ^= mix64(base + 0x9E3779B97F4A7C15ULL * (cls + 1));
    return mix64(h + 0xBF58476D1CE4E5B9ULL * (idx + 1));
}

const ShapeFamily* find_family(const std::string& name) {
    for (const auto& f : catalog())
        if (f.name == name) return &f;
    return nullptr;
}

}  // namespace

double Primitive::area() const {
    switch (kind) {
        case PrimKind::Box:
            return 8.0 * (half[0] * half[1] + half[1] * half[2] + half[2] * half[0]);
        case PrimKind::Cylinder:
            return 4.0 * kPi * radius * half_height;
        case PrimKind::Disk:
            return kPi * radius * radius;
        case PrimKind::SphereCap:
            return 2.0 * kPi * radius * radius * (1.0 - cap_cos);
    }
    return 0.0;
}

GenProfile default_profile() { return GenProfile{}; }

GenProfile shifted_profile() {
    GenProfile p;
    p.name = "B";
    p.jitter_sigma = 0.03;
    p.occlude = true;
    p.occlusion_radius = 0.25;
    p.z_squash = 0.7;
    return p;
}

const std::vector<ShapeFamily>& catalog() {
    static const std::vector<ShapeFamily> families = {
        {"table", &make_table},       {"chair", &make_chair},   {"lamp", &make_lamp},
        {"airplane", &make_airplane}, {"mug", &make_mug},       {"bed", &make_bed},
        {"bookshelf", &make_bookshelf}, {"stool", &make_stool}, {"bottle", &make_bottle},
        {"bench", &make_bench},
    };
    return families;
}

void normalize_cloud(PointCloud& cloud) {
    if (cloud.pts.empty()) throw std::invalid_argument("normalize_cloud: empty cloud");
    Vec3 c{0, 0, 0};
    for (const auto& p : cloud.pts)
        for (int i = 0; i < 3; ++i) c[i] += p[i];
    for (int i = 0; i < 3; ++i) c[i] /= static_cast<double>(cloud.pts.size());
    double max_norm = 0.0;
    for (auto& p : cloud.pts) {
        for (int i = 0; i < 3; ++i) p[i] -= c[i];
        max_norm = std::max(max_norm, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
    }
    if (max_norm <= 1e-12) throw std::invalid_argument("normalize_cloud: degenerate cloud");
    for (auto& p : cloud.pts)
        for (int i = 0; i < 3; ++i) p[i] /= max_norm;
}

ShapeDetail generate_shape_detailed(const std::string& family, std::uint64_t seed, std::size_t L,
                                    const GenProfile& profile) {
    const ShapeFamily* fam = find_family(family);
    if (!fam) throw std::invalid_argument("unknown shape family '" + family + "'");
    if (L < 64) throw std::invalid_argument("generate_shape: need at least 64 points");

    Rng rng(mix64(seed ^ fnv1a64(family.c_str()) ^ fnv1a64(profile.name.c_str()) ^ mix64(L)));
    ShapeDetail out;
    out.prims = fam->recipe(rng);
    out.z_squash = profile.z_squash;

    std::vector<double> cum;
    double total = 0.0;
    for (const auto& p : out.prims) {
        total += p.area();
        cum.push_back(total);
    }
    if (total <= 0.0) throw std::invalid_argument("generate_shape: recipe has zero surface area");

    auto sample_one = [&](Vec3& pt, int& part) {
        const double r = rng.uniform() * total;
        std::size_t pi = 0;
        while (pi + 1 < cum.size() && cum[pi] <= r) ++pi;
        const Primitive& prim = out.prims[pi];
        part = static_cast<int>(pi);
        Vec3 canon{0, 0, 0};
        switch (prim.kind) {
            case PrimKind::Box: {
                const double ax = 4.0 * prim.half[1] * prim.half[2];
                const double ay = 4.0 * prim.half[0] * prim.half[2];
                const double az = 4.0 * prim.half[0] * prim.half[1];
                const double face = rng.uniform() * 2.0 * (ax + ay + az);
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
                if (face < 2 * ax) {
                    canon = {sign * prim.half[0], u * prim.half[1], v * prim.half[2]};
                } else if (face < 2 * (ax + ay)) {
                    canon = {u * prim.half[0], sign * prim.half[1], v * prim.half[2]};
                } else {
                    canon = {u * prim.half[0], v * prim.half[1], sign * prim.half[2]};
                }
                pt = canon;  // boxes are axis-aligned; no orientation step
                break;
            }
            case PrimKind::Cylinder: {
                const double th = rng.uniform() * 2.0 * kPi;
                const double w = rng.uniform(-prim.half_height, prim.half_height);
                canon = {prim.radius * std::cos(th), prim.radius * std::sin(th), w};
                pt = orient(canon, prim.axis);
                break;
            }
            case PrimKind::Disk: {
                const double rho = prim.radius * std::sqrt(rng.uniform());
                const double th = rng.uniform() * 2.0 * kPi;
                canon = {rho * std::cos(th), rho * std::sin(th), 0.0};
                pt = orient(canon, prim.axis);
                break;
            }
            case PrimKind::SphereCap: {
                const double cz = prim.cap_cos + rng.uniform() * (1.0 - prim.cap_cos);
                const double s = std::sqrt(std::max(0.0, 1.0 - cz * cz));
                const double th = rng.uniform() * 2.0 * kPi;
                canon = {prim.radius * s * std::cos(th), prim.radius * s * std::sin(th),
                         prim.radius * cz};
                pt = orient(canon, prim.axis);
                break;
            }
        }
        for (int i = 0; i < 3; ++i) pt[i] += prim.center[i];
    };

    const std::size_t n_raw = profile.occlude ? 2 * L : L;
    std::vector<Vec3> raw(n_raw);
    std::vector<int> raw_part(n_raw);
    for (std::size_t i = 0; i < n_raw; ++i) sample_one(raw[i], raw_part[i]);

    auto& pts = out.cloud.pts;
    if (profile.occlude) {
        double radius = profile.occlusion_radius;
        bool done = false;
        for (int attempt = 0; attempt < 10 && !done; ++attempt) {
            const Vec3 anchor = raw[rng.uniform_int(n_raw)];
            const double r2 = radius * radius;
            pts.clear();
            out.point_part.clear();
            for (std::size_t i = 0; i < n_raw && pts.size() < L; ++i) {
                if (sqdist(raw[i], anchor) > r2) {
                    pts.push_back(raw[i]);
                    out.point_part.push_back(raw_part[i]);
                }
            }
            done = pts.size() == L;
            radius *= 0.5;
        }
        if (!done) {
            pts.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(L));
            out.point_part.assign(raw_part.begin(),
                                  raw_part.begin() + static_cast<std::ptrdiff_t>(L));
        }
    } else {
        pts = std::move(raw);
        out.point_part = std::move(raw_part);
    }

    for (auto& p : pts) p[2] *= profile.z_squash;
    for (auto& p : pts)
        for (int i = 0; i < 3; ++i) p[i] += profile.jitter_sigma * rng.normal();

    out.rot_angle = rng.uniform() * 2.0 * kPi;
    const double ca = std::cos(out.rot_angle), sa = std::sin(out.rot_angle);
    for (auto& p : pts) {
        const double x = ca * p[0] - sa * p[1];
        const double y = sa * p[0] + ca * p[1];
        p[0] = x;
        p[1] = y;
    }

    Vec3 c{0, 0, 0};
    for (const auto& p : pts)
        for (int i = 0; i < 3; ++i) c[i] += p[i];
    for (int i = 0; i < 3; ++i) c[i] /= static_cast<double>(L);
    double max_norm = 0.0;
    for (auto& p : pts) {
        for (int i = 0; i < 3; ++i) p[i] -= c[i];
        max_norm = std::max(max_norm, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
    }
    if (max_norm <= 1e-12) throw std::invalid_argument("generate_shape: degenerate cloud");
    for (auto& p : pts)
        for (int i = 0; i < 3; ++i) p[i] /= max_norm;
    out.centroid = c;
    out.scale = max_norm;
    return out;
}

PointCloud generate_shape(const std::string& family, std::uint64_t seed, std::size_t L,
                          const GenProfile& profile) {
    return generate_shape_detailed(family, seed, L, profile).cloud;
}

void validate_task_spec(const TaskSpec& spec) {
    if (spec.known_classes.empty()) throw ConfigError("task needs at least one known class");
    if (spec.train_per_class <= 0 || spec.test_per_class <= 0)
        throw ConfigError("per-class sample counts must be positive");
    for (std::size_t i = 0; i < spec.known_classes.size(); ++i) {
        const auto& k = spec.known_classes[i];
        if (!find_family(k)) throw ConfigError("unknown family '" + k + "' in known classes");
        for (std::size_t j = i + 1; j < spec.known_classes.size(); ++j)
            if (spec.known_classes[j] == k) throw ConfigError("duplicate known class '" + k + "'");
        for (const auto& u : spec.unknown_classes)
            if (k == u) throw ConfigError("class '" + k + "' is both known and unknown");
    }
    for (const auto& u : spec.unknown_classes)
        if (!find_family(u)) throw ConfigError("unknown family '" + u + "' in unknown classes");
    if (spec.known_classes.size() + spec.unknown_classes.size() > catalog().size())
        throw ConfigError("catalog has too few families for this task");
}

namespace {

void push_known_samples(const TaskSpec& spec, TaskData& data) {
    const auto profile = default_profile();
    for (std::size_t k = 0; k < spec.known_classes.size(); ++k) {
        const auto& fam = spec.known_classes[k];
        for (int i = 0; i < spec.train_per_class; ++i) {
            data.train.push_back({generate_shape(fam, derive_seed(spec.seed, "train", k, i),
                                                 spec.points, profile),
                                  static_cast<int>(k) + 1, profile.name});
        }
        for (int i = 0; i < spec.test_per_class; ++i) {
            data.test.push_back({generate_shape(fam, derive_seed(spec.seed, "test", k, i),
                                                spec.points, profile),
                                 static_cast<int>(k) + 1, profile.name});
        }
    }
}

}  // namespace

TaskData build_single_task(const TaskSpec& spec) {
    validate_task_spec(spec);
    TaskData data;
    data.num_known = static_cast<int>(spec.known_classes.size());
    push_known_samples(spec, data);
    const auto profile = default_profile();
    for (std::size_t u = 0; u < spec.unknown_classes.size(); ++u) {
        for (int i = 0; i < spec.test_per_class; ++i) {
            data.test.push_back({generate_shape(spec.unknown_classes[u],
                                                derive_seed(spec.seed, "unknown", u, i),
                                                spec.points, profile),
                                 data.num_known + 1, profile.name});
        }
    }
    return data;
}

TaskData build_cross_task(const TaskSpec& spec) {
    validate_task_spec(spec);
    if (spec.unknown_classes.empty())
        throw ConfigError("cross-domain task needs unknown classes");
    TaskData data;
    data.num_known = static_cast<int>(spec.known_classes.size());
    push_known_samples(spec, data);
    const auto shifted = shifted_profile();
    for (std::size_t u = 0; u < spec.unknown_classes.size(); ++u) {
        for (int i = 0; i < spec.test_per_class; ++i) {
            data.test.push_back({generate_shape(spec.unknown_classes[u],
                                                derive_seed(spec.seed, "unknown", u, i),
                                                spec.points, shifted),
                                 data.num_known + 1, shifted.name});
        }
    }
    return data;
}

TaskData build_mixup_task(const TaskSpec& spec) {
    validate_task_spec(spec);
    TaskData data;
    data.num_known = static_cast<int>(spec.known_classes.size());
    if (data.num_known < 2) throw ConfigError("confusing-mixup task needs at least 2 known classes");
    push_known_samples(spec, data);

    const std::size_t slots =
        spec.unknown_classes.empty() ? spec.known_classes.size() : spec.unknown_classes.size();
    const std::size_t n_mix = slots * static_cast<std::size_t>(spec.test_per_class);
    Rng pair_rng(derive_seed(spec.seed, "mixpairs", 0, 0));
    const auto profile = default_profile();
    for (std::size_t j = 0; j < n_mix; ++j) {
        const std::size_t c1 = pair_rng.uniform_int(spec.known_classes.size());
        std::size_t c2 = pair_rng.uniform_int(spec.known_classes.size() - 1);
        if (c2 >= c1) ++c2;
        PointCloud a = generate_shape(spec.known_classes[c1], derive_seed(spec.seed, "mixa", c1, j),
                                      spec.points, profile);
        PointCloud b = generate_shape(spec.known_classes[c2], derive_seed(spec.seed, "mixb", c2, j),
                                      spec.points, profile);
        PointCloud mixed =
            rigid_subset_mix(a, b, spec.mix_radius, derive_seed(spec.seed, "mixseed", j, 0));
        normalize_cloud(mixed);
        data.test.push_back({std::move(mixed), data.num_known + 1, "mix"});
    }
    return data;
}

TaskData build_task(const TaskSpec& spec) {
    if (spec.protocol == "single") return build_single_task(spec);
    if (spec.protocol == "cross") return build_cross_task(spec);
    if (spec.protocol == "confusing_mixup") return build_mixup_task(spec);
    throw ConfigError("unknown task protocol '" + spec.protocol + "'");
}

PointCloud rigid_subset_mix(const PointCloud& a, const PointCloud& b, double r,
                            std::uint64_t seed) {
    if (a.size() != b.size())
        throw std::invalid_argument("rigid_subset_mix: clouds must have equal point counts");
    if (!(r > 0.0 && r < 1.0))
        throw std::invalid_argument("rigid_subset_mix: radius must lie in (0, 1)");
    const std::size_t L = a.size();
    Rng rng(mix64(seed));
    for (int attempt = 0; attempt < 10; ++attempt) {
        const Vec3 anchor = a.pts[rng.uniform_int(L)];
        const double r2 = r * r;
        std::vector<std::size_t> subset;
        for (std::size_t i = 0; i < L; ++i)
            if (sqdist(a.pts[i], anchor) <= r2) subset.push_back(i);
        if (subset.empty()) continue;

        // Evict the |subset| points of b closest to the anchor location.
        std::vector<std::size_t> order(L);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return sqdist(b.pts[x], anchor) < sqdist(b.pts[y], anchor);
        });
        std::vector<char> evicted(L, 0);
        for (std::size_t i = 0; i < subset.size(); ++i) evicted[order[i]] = 1;

        PointCloud out;
        out.pts.reserve(L);
        for (std::size_t i = 0; i < L; ++i)
            if (!evicted[i]) out.pts.push_back(b.pts[i]);
        for (std::size_t i : subset) out.pts.push_back(a.pts[i]);
        return out;
    }
    throw std::runtime_error("rigid_subset_mix: empty subset after 10 attempts");
}

void write_cloud_file(const std::string& path, const PointCloud& cloud) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "PCV1 " << cloud.size() << "\n";
    char buf[96];
    for (const auto& p : cloud.pts) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
        f << buf;
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

PointCloud read_cloud_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw ParseError(path + ": empty file (line 1)");
    std::istringstream header(line);
    std::string magic;
    long long count = -1;
    header >> magic >> count;
    if (magic != "PCV1" || count < 0 || !header)
        throw ParseError(path + ": bad header (line 1), expected 'PCV1 <count>'");

    PointCloud cloud;
    cloud.pts.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
        const long long line_no = i + 2;
        if (!std::getline(f, line)) {
            throw ParseError(path + ": header claims " + std::to_string(count) +
                             " points, file ends after " + std::to_string(i) + " (line " +
                             std::to_string(line_no) + ")");
        }
        // strtod (unlike iostream extraction) accepts nan/inf tokens, which we
        // then reject explicitly with the line number.
        Vec3 p;
        const char* cursor = line.c_str();
        for (int k = 0; k < 3; ++k) {
            char* end = nullptr;
            p[k] = std::strtod(cursor, &end);
            if (end == cursor)
                throw ParseError(path + ": malformed point (line " + std::to_string(line_no) +
                                 ")");
            cursor = end;
        }
        while (*cursor == ' ' || *cursor == '\t' || *cursor == '\r') ++cursor;
        if (*cursor != '\0')
            throw ParseError(path + ": trailing data (line " + std::to_string(line_no) + ")");
        for (double v : p) {
            if (!std::isfinite(v))
                throw ParseError(path + ": non-finite coordinate (line " +
                                 std::to_string(line_no) + ")");
        }
        cloud.pts.push_back(p);
    }
    while (std::getline(f, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos)
            throw ParseError(path + ": more points than the header declares");
    }
    return cloud;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
    nlohmann::json j;
    j["K"] = manifest.K;
    j["samples"] = nlohmann::json::array();
    for (const auto& s : manifest.samples) {
        j["samples"].push_back({{"path", s.path}, {"label", s.label}, {"domain", s.domain}});
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << j.dump(2) << "\n";
}

Manifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    Manifest m;
    try {
        m.K = j.at("K").get<int>();
        for (const auto& s : j.at("samples")) {
            m.samples.push_back({s.at("path").get<std::string>(), s.at("label").get<int>(),
                                 s.at("domain").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return m;
}

}  // namespace partcom
