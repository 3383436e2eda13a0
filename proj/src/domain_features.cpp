#include "ftk/domain_features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ftk/errors.hpp"
#include "numfmt.hpp"
#include "text_util.hpp"

namespace ftk {

namespace {

constexpr double kWeightSumTol = 1e-9;

void check_finite_row(const std::vector<double>& v, const std::string& where) {
    for (double x : v) {
        if (!std::isfinite(x)) throw DataError(where + ": non-finite feature value");
    }
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

} // namespace

void RawFeatures::validate() const {
    if (rows.empty()) throw EmptyInputError("feature table has no rows");
    if (dim < 1) throw DimensionError("feature dimension must be >= 1");
    for (const auto& row : rows) {
        if (row.values.size() != dim) {
            throw DimensionError("inconsistent feature row width: expected " +
                                 std::to_string(dim) + ", got " +
                                 std::to_string(row.values.size()));
        }
        check_finite_row(row.values, "row '" + row.label + "'");
    }
}

void DomainProfile::validate() const {
    if (labels.empty()) throw EmptyInputError("profile has no classes");
    if (centroids.size() != labels.size() || weights.size() != labels.size()) {
        throw DimensionError("profile field sizes disagree");
    }
    const std::size_t d = centroids.front().size();
    if (d < 1) throw DimensionError("centroid dimension must be >= 1");
    double sum = 0.0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (centroids[k].size() != d) throw DimensionError("centroid dimensions disagree");
        check_finite_row(centroids[k], "class '" + labels[k] + "'");
        if (!(weights[k] > 0.0)) throw InvalidInput("class weight must be > 0");
        sum += weights[k];
    }
    if (std::abs(sum - 1.0) > kWeightSumTol) {
        throw InvalidInput("class weights must sum to 1 (got " + detail::format_double(sum) + ")");
    }
}

LoadedFeatures load_feature_table(const std::string& path, FeatureFormat format) {
    const auto lines = read_lines(path);
    if (lines.empty() || (lines.size() == 1 && detail::trim(lines[0]).empty())) {
        throw EmptyInputError(path + ": empty file");
    }

    const auto header = detail::split_csv(lines[0]);
    const std::size_t meta_cols = format == FeatureFormat::Csv ? 1 : 2;
    if (header.size() < meta_cols + 1 || header[0] != "label" ||
        (format == FeatureFormat::CentroidCsv && header[1] != "count")) {
        throw ParseError(path, 1, "bad header for this format");
    }
    const std::size_t dim = header.size() - meta_cols;

    if (format == FeatureFormat::Csv) {
        RawFeatures raw;
        raw.dim = dim;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (detail::trim(lines[i]).empty()) continue;
            const auto fields = detail::split_csv(lines[i]);
            if (fields.size() != header.size()) {
                throw DimensionError(path + ":" + std::to_string(i + 1) +
                                     ": row width " + std::to_string(fields.size()) +
                                     " does not match header width " +
                                     std::to_string(header.size()));
            }
            FeatureRow row;
            row.label = std::string(fields[0]);
            row.values.reserve(dim);
            for (std::size_t c = 1; c < fields.size(); ++c) {
                double v;
                if (!detail::parse_double(fields[c], v)) {
                    throw ParseError(path, i + 1, "cannot parse value '" + std::string(fields[c]) + "'");
                }
                if (!std::isfinite(v)) throw DataError(path + ":" + std::to_string(i + 1) + ": non-finite value");
                row.values.push_back(v);
            }
            raw.rows.push_back(std::move(row));
        }
        if (raw.rows.empty()) throw EmptyInputError(path + ": no data rows");
        return raw;
    }

    // centroid-csv
    struct Entry {
        std::string label;
        double count;
        std::vector<double> centroid;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        const auto fields = detail::split_csv(lines[i]);
        if (fields.size() != header.size()) {
            throw DimensionError(path + ":" + std::to_string(i + 1) +
                                 ": row width " + std::to_string(fields.size()) +
                                 " does not match header width " + std::to_string(header.size()));
        }
        Entry e;
        e.label = std::string(fields[0]);
        if (!detail::parse_double(fields[1], e.count)) {
            throw ParseError(path, i + 1, "cannot parse count '" + std::string(fields[1]) + "'");
        }
        if (!std::isfinite(e.count) || e.count <= 0.0) {
            throw DataError(path + ":" + std::to_string(i + 1) + ": count must be a positive finite number");
        }
        e.centroid.reserve(dim);
        for (std::size_t c = 2; c < fields.size(); ++c) {
            double v;
            if (!detail::parse_double(fields[c], v)) {
                throw ParseError(path, i + 1, "cannot parse value '" + std::string(fields[c]) + "'");
            }
            if (!std::isfinite(v)) throw DataError(path + ":" + std::to_string(i + 1) + ": non-finite value");
            e.centroid.push_back(v);
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw EmptyInputError(path + ": no data rows");

    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.label < b.label; });
    for (std::size_t k = 1; k < entries.size(); ++k) {
        if (entries[k].label == entries[k - 1].label) {
            throw DataError(path + ": duplicate class label '" + entries[k].label + "'");
        }
    }

    double total = 0.0;
    for (const auto& e : entries) total += e.count;

    DomainProfile profile;
    profile.name = path;
    profile.extractor_id = "";
    for (auto& e : entries) {
        profile.labels.push_back(std::move(e.label));
        profile.centroids.push_back(std::move(e.centroid));
        profile.weights.push_back(e.count / total);
    }
    profile.validate();
    return profile;
}

DomainProfile build_domain_profile(const RawFeatures& raw, std::string name,
                                   std::string extractor_id) {
    raw.validate();

    std::map<std::string, std::vector<const std::vector<double>*>> groups;
    for (const auto& row : raw.rows) groups[row.label].push_back(&row.values);

    DomainProfile profile;
    profile.name = std::move(name);
    profile.extractor_id = std::move(extractor_id);

    const double total = static_cast<double>(raw.rows.size());
    for (auto& [label, members] : groups) {
        // Canonical summation order: invariant under input row permutations.
        std::sort(members.begin(), members.end(),
                  [](const std::vector<double>* a, const std::vector<double>* b) {
                      return std::lexicographical_compare(a->begin(), a->end(), b->begin(), b->end());
                  });
        std::vector<double> centroid(raw.dim, 0.0);
        for (const auto* v : members) {
            for (std::size_t d = 0; d < raw.dim; ++d) centroid[d] += (*v)[d];
        }
        const double count = static_cast<double>(members.size());
        for (double& x : centroid) x /= count;
        profile.labels.push_back(label);
        profile.centroids.push_back(std::move(centroid));
        profile.weights.push_back(count / total);
    }
    profile.validate();
    return profile;
}

DomainProfile load_profile(const std::string& path, FeatureFormat format,
                           std::string name, std::string extractor_id) {
    auto loaded = load_feature_table(path, format);
    if (std::holds_alternative<DomainProfile>(loaded)) {
        auto profile = std::get<DomainProfile>(std::move(loaded));
        profile.name = std::move(name);
        profile.extractor_id = std::move(extractor_id);
        return profile;
    }
    return build_domain_profile(std::get<RawFeatures>(loaded), std::move(name),
                                std::move(extractor_id));
}

void write_centroid_csv(const DomainProfile& profile, const std::string& path) {
    profile.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out << "label,count";
    for (std::size_t d = 0; d < profile.dim(); ++d) out << ",f" << d;
    out << "\n";
    for (std::size_t k = 0; k < profile.classes(); ++k) {
        out << profile.labels[k] << "," << detail::format_double(profile.weights[k]);
        for (double v : profile.centroids[k]) out << "," << detail::format_double(v);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace ftk
