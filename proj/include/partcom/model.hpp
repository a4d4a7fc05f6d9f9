#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "partcom/backbone.hpp"
#include "partcom/config.hpp"
#include "partcom/part_head.hpp"
#include "partcom/tensor.hpp"

namespace partcom {

// One forward pass. s/zp are only defined for the part-prototype head,
// logits only for the softmax head.
struct ForwardOut {
    Tensor z;       // L x d point features
    Tensor s;       // KM x L similarity map
    Tensor zp;      // KM x d part composites
    Tensor zc;      // 1 x Dc final feature (pooled point feature for softmax)
    Tensor logits;  // 1 x K (softmax head)
};

// The full model: encoder, optional part head, class prototype bank C and
// virtual unknown bank V (all K x Dc). V only receives gradient when the
// unknown-synthesis branch is active, but it always exists so checkpoints
// have one schema.
struct PartComModel {
    ExperimentConfig cfg;
    Encoder encoder;
    PartBank bank;      // part head only
    Reducer reducer;    // part head only
    Tensor c_protos;    // proto heads
    Tensor v_protos;    // proto heads
    Tensor w_cls, b_cls;    // softmax head only
    Tensor w_pool, b_pool;  // global-feature proto head only (post-pool projection)

    static PartComModel init(const ExperimentConfig& cfg);

    // Stable name -> tensor listing; the order defines the optimizer slots
    // and the checkpoint layout.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> parameters() const;

    ForwardOut forward(const PointCloud& x, const std::vector<std::vector<int>>& neighbors) const;

    int predict(const ForwardOut& f) const;        // closed-set, 1..K
    double confidence(const ForwardOut& f) const;  // higher = more likely known
};

// Serialized training state. Reloading reproduces forward outputs bitwise.
struct Checkpoint {
    std::string config_text;  // canonical; enough to rebuild the model
    std::uint64_t config_hash = 0;
    int epoch = 0;
    std::string rng_state;
    std::vector<std::pair<std::string, Tensor>> params;
};

Checkpoint snapshot(const PartComModel& model, int epoch, const std::string& rng_state);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Rebuild the model from the embedded config and overwrite its parameters
// with the checkpoint values. ParseError if names or shapes disagree.
PartComModel restore_model(const Checkpoint& ckpt);

}  // namespace partcom
