#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "partcom/config.hpp"
#include "partcom/metrics.hpp"
#include "partcom/model.hpp"
#include "partcom/shapegen.hpp"
#include "partcom/tensor.hpp"

namespace partcom {

// Adaptive-moment gradient descent over a fixed parameter list. step()
// consumes and zeroes the accumulated gradients.
class Adam {
public:
    Adam(std::vector<Tensor> params, double lr);
    void step();

private:
    struct Slot {
        Tensor param;
        std::vector<double> m, v;
    };
    std::vector<Slot> slots_;
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
};

// Per-epoch means (over batches) of the unweighted loss components and the
// weighted total actually optimized.
struct EpochStats {
    double ce = 0, pl = 0, pb = 0, pd = 0, pufs = 0, total = 0;
};

struct TrainOutput {
    PartComModel model;
    Checkpoint checkpoint;
    EpochStats initial;              // before any gradient step
    std::vector<EpochStats> history; // one entry per epoch
};

// Generate the task's training split, train for cfg.epochs, and snapshot the
// result. Per-epoch component means go to `log` when given. A non-finite
// batch loss aborts with NumericalError carrying the component values.
TrainOutput train_model(const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct EvalOutput {
    std::vector<ScoreRecord> records;
    double acc = 0.0;
    OscrCurve curve;
    bool oscr_valid = false;  // false when the split lacks knowns or unknowns
    std::size_t n_known = 0, n_unknown = 0;
    // Mean (over known samples) entropy of the per-shape histogram of hard
    // point-to-prototype assignments within the true class. Part head only.
    double mean_usage_entropy = 0.0;
    std::size_t entropy_samples = 0;
};

EvalOutput evaluate_model(const PartComModel& model, const std::vector<LabeledSample>& test);

// metrics.json (exactly {acc, oscr, n_known, n_unknown, seed}), records.csv,
// curve.csv, diagnostics.json into dir (created if needed). Byte-identical
// across runs for identical inputs.
void write_eval_outputs(const std::string& dir, const EvalOutput& out, std::uint64_t seed);

// Dataset export for gen-data: clouds/<split>_NNNN.pc plus
// train_manifest.json / test_manifest.json with dir-relative paths.
void write_task_dataset(const TaskData& data, const std::string& dir);

struct SplitData {
    std::vector<LabeledSample> samples;
    int K = 0;
};

// Read a manifest and its clouds; relative paths resolve against the
// manifest's directory.
SplitData load_split(const std::string& manifest_path);

// One row of the ablation grid: which switches are on, and the per-seed
// scores once run.
struct AblationRow {
    std::string label;
    bool part = false, pd = false, pb = false, pufs = false;
    std::string fusion = "cat";
    std::vector<double> accs, oscrs, entropies;
    double acc_mean = 0, acc_std = 0, oscr_mean = 0, oscr_std = 0, entropy_mean = 0;
};

// The fixed 7-row switch grid, from bare global-feature baseline to the full
// model: baseline / +part / +part+pd / +part+pb / +part+pb+pd /
// +part+pb+pd with max fusion / full (+ unknown synthesis).
std::vector<AblationRow> ablation_rows();

// Base config with one row's switches applied (weights for disabled terms
// zeroed, fusion and synthesis flags set).
ExperimentConfig apply_ablation_row(const ExperimentConfig& base, const AblationRow& row);

// Train and evaluate every row over seeds base.seed .. base.seed + n_seeds-1
// and fill in the mean/std columns.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base, int n_seeds,
                                      std::ostream* log = nullptr);

std::string format_ablation_table(const std::vector<AblationRow>& rows);
void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

}  // namespace partcom
