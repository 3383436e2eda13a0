#ifndef FTK_DOMAIN_FEATURES_HPP_
#define FTK_DOMAIN_FEATURES_HPP_

#include <string>
#include <variant>
#include <vector>

namespace ftk {

// One per-image feature vector with its class label.
struct FeatureRow {
    std::string label;
    std::vector<double> values;
};

struct RawFeatures {
    std::vector<FeatureRow> rows;
    std::size_t dim = 0;

    void validate() const; // uniform finite rows, dim >= 1, at least one row
};

// Per-class centroid feature vectors with class weights. Classes are kept
// sorted lexicographically by label; weights are fractions summing to 1.
struct DomainProfile {
    std::string name;
    std::string extractor_id;
    std::vector<std::string> labels;
    std::vector<std::vector<double>> centroids;
    std::vector<double> weights;

    std::size_t classes() const { return labels.size(); }
    std::size_t dim() const { return centroids.empty() ? 0 : centroids.front().size(); }
    void validate() const;
};

enum class FeatureFormat { Csv, CentroidCsv };

using LoadedFeatures = std::variant<RawFeatures, DomainProfile>;

// csv:          header "label,f0,...,f{D-1}", one row per image.
// centroid-csv: header "label,count,f0,...,f{D-1}", one row per class;
//               counts are positive reals and are renormalized to weights.
LoadedFeatures load_feature_table(const std::string& path, FeatureFormat format);

// Averages rows per class; weight_k = count_k / total rows. Within a class,
// rows are summed in a canonical (sorted) order so the result does not
// depend on input row order.
DomainProfile build_domain_profile(const RawFeatures& raw, std::string name,
                                   std::string extractor_id);

// Loads either format and returns a profile (csv rows are reduced first).
DomainProfile load_profile(const std::string& path, FeatureFormat format,
                           std::string name, std::string extractor_id);

void write_centroid_csv(const DomainProfile& profile, const std::string& path);

} // namespace ftk

#endif // FTK_DOMAIN_FEATURES_HPP_
