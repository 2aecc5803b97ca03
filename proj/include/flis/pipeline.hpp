#pragma once

#include "flis/baselines.hpp"
#include "flis/flis_train.hpp"
#include "flis/imaging.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace flis {

enum class Method { flis, ddls, src };

enum class MaskSource {
    candidate, // threshold + morphology substitute (union with labelled pixels when training)
    truth      // masks supplied alongside the stack
};

std::string to_string(Method m);
Method parse_method(const std::string& s);
std::string to_string(MaskSource m);
MaskSource parse_mask_source(const std::string& s);

struct TrainConfig {
    Method method = Method::flis;
    int w = 11;
    int P = 12;
    FlisHyperParams hp;
    int quota = 4700;           // samples per class per partition (upper bound)
    int bins = 8;               // distance bins for patch selection
    uint64_t seed = 1;
    bool normalize_distance = true; // divide distances by the stack maximum
    double lambda_infer = 0.1;  // L1 weight of the segmentation-time code
    int src_atoms = 200;        // SRC pool size per class per partition
    MaskSource mask_source = MaskSource::candidate;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// One patient: slices in base-to-top order, optional labels and head masks.
struct PatientStack {
    CtStack images;
    LabelStack labels;
    MaskStack masks;
};

struct Model {
    TrainConfig config; // config.method and config.hp.K describe the partitions
    std::vector<PartitionModel> parts;

    Method method() const { return config.method; }
    int P() const { return static_cast<int>(parts.size()); }
    Eigen::Index feature_dim() const { return parts.empty() ? 0 : parts.front().D.rows(); }
    Eigen::Index atoms() const { return parts.empty() ? 0 : parts.front().D.cols(); }

    friend bool operator==(const Model&, const Model&) = default;
};

struct PartitionLog {
    int partition = 0;
    Eigen::Index samples_per_class = 0;
    std::vector<TrainReport> reports; // 3 for FLIS (brain, csf, subdural), 1 for DDLS, none for SRC
};

struct TrainingLog {
    std::vector<PartitionLog> partitions;
};

/// Feature length for a method and patch width.
Eigen::Index feature_length(Method m, int w);

/// Head mask for every slice according to `source`; labelled pixels are
/// always included when labels are present.
MaskStack stack_masks(const PatientStack& s, MaskSource source);

/// Distance maps of a stack, divided by the stack maximum when `normalize`.
std::vector<DistanceMap> stack_distances(const MaskStack& masks, bool normalize);

/// Throws InvalidArgument on inconsistent settings.
void validate(const TrainConfig& cfg);

/// Samples balanced per-class patches for every partition and learns one
/// PartitionModel per partition. Feature vectors are scaled to unit norm here
/// and in segment(). Throws DegenerateClass when a class has no
/// pixel in a partition's training pool.
Model train(const std::vector<PatientStack>& stacks, const TrainConfig& cfg, TrainingLog* log = nullptr);

struct Segmentation {
    LabelStack labels;
    bool remapped = false;    // stack shorter than P: slices mapped by floor(t*P/T) onto P partitions
    size_t undecidable = 0;   // SRC pixels whose code was zero (left as background)
};

/// Labels every pixel of the head mask of each slice with the partition's
/// model; pixels outside the mask are background. `masks` replaces the
/// candidate-region substitute when given.
Segmentation segment(const Model& model, const CtStack& stack, const MaskStack* masks = nullptr);

/// Intensity-only reference: a Gaussian per class fitted on training pixels.
baselines::IntensityClassifier fit_intensity(const std::vector<PatientStack>& stacks);
LabelStack segment_intensity(const baselines::IntensityClassifier& ic, const CtStack& stack,
                             const MaskStack* masks = nullptr);

/// Directory layout: <dir>/images/*.pgm, <dir>/labels/*.pgm, optional <dir>/mask/*.pgm.
/// Throws InputError("labels not found") when labels are required but missing.
PatientStack load_patient(const std::filesystem::path& dir, bool need_labels);
void save_patient(const std::filesystem::path& dir, const PatientStack& s);
void save_labels(const std::filesystem::path& dir, const LabelStack& labels);

} // namespace flis
