#pragma once

#include <string>
#include <vector>

namespace ftk {

// One reference point: a target dataset's similarity to a source domain and
// the effective learning rate that tuned best for it.
struct ReferenceEntry {
    std::string source_model;  // e.g. "imagenet/resnet101"
    std::string extractor;     // feature extractor the sim score came from
    std::string target_name;
    double sim = 0.0;          // in (0, 1]
    double optimal_elr = 0.0;  // in [1e-4, 10]

    void validate() const;
};

struct ElrBucket {
    double lo = 0.0;
    double hi = 0.0;
};

struct Recommendation {
    ReferenceEntry nearest;
    double elr = 0.0;
    ElrBucket bucket;
    double sim_gap = 0.0;
    std::string strategy = "nearest-neighbor";
    std::string warning;  // empty when none
};

// Built-in reference table: per-source optimal ELRs for seven classification
// targets under five source/architecture combinations.
std::vector<ReferenceEntry> default_reference_db();

// CSV with header source_model,extractor,target,sim,optimal_elr. An empty
// file yields an empty database (recommend_elr then fails with a lookup
// error).
std::vector<ReferenceEntry> load_reference_db(const std::string& path);

// Decade bucket [10^k, 10^(k+1)] containing elr. Exact powers of ten sit at
// the lower edge of their bucket, except 1.0 which closes the top bucket
// [0.1, 1.0].
ElrBucket elr_bucket(double elr);

// Nearest reference (by |sim - sim_score|) among entries for source_model;
// ties go to the lexicographically smaller target name. A non-empty
// query_extractor that differs from the nearest entry's extractor sets the
// warning field.
Recommendation recommend_elr(const std::vector<ReferenceEntry>& db,
                             const std::string& source_model, double sim_score,
                             const std::string& query_extractor = "");

}  // namespace ftk
