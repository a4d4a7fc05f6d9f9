// Deterministic procedural point-cloud generator: a small catalog of
// desk-scale shape families, each composed of named primitive parts, plus the
// three dataset protocols (single-domain, cross-domain, confusing-mixup) and
// the plain-text cloud / JSON manifest file formats.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace partcom {

struct PointCloud {
    std::vector<std::array<double, 3>> pts;
    std::size_t size() const { return pts.size(); }
};

// label: 1..K for known classes, K+1 for unknown.
struct LabeledSample {
    PointCloud cloud;
    int label = 0;
    std::string domain;
};

struct TaskSpec {
    std::string protocol = "single";  // single | cross | confusing_mixup
    std::vector<std::string> known_classes;
    std::vector<std::string> unknown_classes;
    int train_per_class = 40;
    int test_per_class = 10;
    std::size_t points = 512;
    std::uint64_t seed = 1;
    double mix_radius = 0.4;
};

// Generator profile; the cross-domain task gives unknowns a shifted profile
// (heavier jitter, ball occlusion, anisotropic z scaling).
struct GenProfile {
    std::string name = "A";
    double jitter_sigma = 0.01;
    bool occlude = false;
    double occlusion_radius = 0.25;
    double z_squash = 1.0;
};

GenProfile default_profile();
GenProfile shifted_profile();

enum class PrimKind { Box, Cylinder, Disk, SphereCap };

// One surface primitive in the shape-local (pre-rotation) frame. Cylinders
// are lateral surfaces, disks are flat circles, sphere caps open toward
// +axis with polar angle <= acos(cap_cos); `axis` picks which coordinate
// axis plays that role (boxes ignore it).
struct Primitive {
    PrimKind kind = PrimKind::Box;
    std::string part;
    std::array<double, 3> center{0, 0, 0};
    std::array<double, 3> half{0.5, 0.5, 0.5};  // box half-extents
    double radius = 0.5;                        // cylinder / disk / cap
    double half_height = 0.5;                   // cylinder
    double cap_cos = 0.0;                       // cap: cos of max polar angle
    int axis = 2;
    double area() const;
};

struct ShapeFamily {
    std::string name;
    // Draws a concrete part layout; dimensions vary a little per instance.
    std::vector<Primitive> (*recipe)(class Rng&);
};

const std::vector<ShapeFamily>& catalog();

// Everything needed to map a generated cloud back into the local frame where
// its primitives live: undo normalization, undo the z rotation, undo z squash.
struct ShapeDetail {
    PointCloud cloud;
    std::vector<Primitive> prims;  // local frame
    std::vector<int> point_part;   // per-point index into prims
    double rot_angle = 0.0;
    std::array<double, 3> centroid{0, 0, 0};
    double scale = 1.0;
    double z_squash = 1.0;
};

// L points sampled area-uniformly over the union of primitive surfaces,
// jittered, rotated about z, then normalized (centroid to origin, max norm
// to 1). Pure function of (family, seed, L, profile).
ShapeDetail generate_shape_detailed(const std::string& family, std::uint64_t seed, std::size_t L,
                                    const GenProfile& profile = default_profile());
PointCloud generate_shape(const std::string& family, std::uint64_t seed, std::size_t L,
                          const GenProfile& profile = default_profile());

// Centroid to origin, max norm to 1 (throws on a degenerate all-equal cloud).
void normalize_cloud(PointCloud& cloud);

struct TaskData {
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> test;
    int num_known = 0;
};

// ConfigError on unknown families, duplicates, known/unknown overlap, or
// nonpositive sample counts.
void validate_task_spec(const TaskSpec& spec);

TaskData build_single_task(const TaskSpec& spec);
TaskData build_cross_task(const TaskSpec& spec);
TaskData build_mixup_task(const TaskSpec& spec);
// Dispatches on spec.protocol.
TaskData build_task(const TaskSpec& spec);

// Ball-query swap: copy the points of `a` within radius r of a random anchor
// point of `a` into `b`, evicting the same number of b-points nearest to that
// anchor. Output keeps exactly L points, all taken verbatim from a or b.
PointCloud rigid_subset_mix(const PointCloud& a, const PointCloud& b, double r,
                            std::uint64_t seed);

// Text format: "PCV1 <L>" header, then one "<x> <y> <z>" line per point.
void write_cloud_file(const std::string& path, const PointCloud& cloud);
PointCloud read_cloud_file(const std::string& path);

struct ManifestEntry {
    std::string path;
    int label = 0;
    std::string domain;
};
struct Manifest {
    std::vector<ManifestEntry> samples;
    int K = 0;
};

void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

}  // namespace partcom
