#pragma once

#include <cstdint>
#include <string>

#include "partcom/backbone.hpp"
#include "partcom/losses.hpp"
#include "partcom/pufs.hpp"
#include "partcom/shapegen.hpp"

namespace partcom {

// Flat key = value experiment configuration. One `seed` drives everything:
// data generation, parameter init, batch shuffling, and the mixing draws all
// derive their own streams from it, so (config, seed) fully determines every
// output byte.
struct ExperimentConfig {
    TaskSpec task;          // task.seed is overwritten with `seed` at parse
    EncoderConfig encoder;

    std::string head = "proto";  // proto | softmax (global-feature CE baseline)
    bool part_head = true;       // proto head only; off = single global prototype per class
    std::string fusion = "cat";  // cat | max
    int m = 4;                   // part prototypes per class
    std::size_t d_r = 16;        // reduced width per part row

    LossWeights weights;
    double ot_epsilon = 0.05;
    int ot_max_iters = 1000;
    std::string pb_rounding = "argmax";  // argmax | greedy (capacity-respecting)
    MixConfig pufs;

    double lr = 1e-3;
    int epochs = 100;
    int batch = 16;
    std::uint64_t seed = 0;

    int k() const { return static_cast<int>(task.known_classes.size()); }

    // Width of the final feature the class prototypes live in.
    std::size_t feature_width() const;

    // ConfigError on any out-of-range field or inconsistent switch combo.
    void validate() const;
};

// Parse "key = value" lines ('#' comments, blank lines ignored; later keys
// win). Unknown keys and a missing `seed` are ConfigErrors; unparseable
// values are ParseErrors. The parsed config is validated.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Every key in a fixed order, %.17g doubles: parsing it back yields an
// equivalent config, and its hash identifies the experiment in checkpoints.
std::string canonical_config_text(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace partcom
