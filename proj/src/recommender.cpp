#include "ftk/recommender.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "ftk/errors.hpp"
#include "text_util.hpp"

namespace ftk {

void ReferenceEntry::validate() const {
    if (source_model.empty() || target_name.empty()) {
        throw InvalidInput("reference entry needs source_model and target names");
    }
    if (!std::isfinite(sim) || sim <= 0.0 || sim > 1.0) {
        throw InvalidInput("reference sim for '" + target_name + "' must lie in (0, 1]");
    }
    if (!std::isfinite(optimal_elr) || optimal_elr < 1e-4 || optimal_elr > 10.0) {
        throw InvalidInput("reference elr for '" + target_name +
                           "' must lie in [1e-4, 10]");
    }
}

std::vector<ReferenceEntry> default_reference_db() {
    // sim / optimal-ELR pairs per target, one column per source+architecture.
    static const struct {
        const char* model;
        const char* extractor;
        const char* target;
        double sim;
        double elr;
    } kRows[] = {
        {"imagenet/resnet101", "imagenet/resnet101", "Dogs", 0.862, 0.001},
        {"imagenet/resnet101", "imagenet/resnet101", "Caltech", 0.892, 0.005},
        {"imagenet/resnet101", "imagenet/resnet101", "Indoor", 0.856, 0.01},
        {"imagenet/resnet101", "imagenet/resnet101", "Birds", 0.860, 0.05},
        {"imagenet/resnet101", "imagenet/resnet101", "Cars", 0.845, 0.5},
        {"imagenet/resnet101", "imagenet/resnet101", "Aircrafts", 0.840, 1.0},
        {"imagenet/resnet101", "imagenet/resnet101", "Flowers", 0.844, 0.1},
        {"imagenet/densenet121", "imagenet/densenet121", "Dogs", 0.851, 0.01},
        {"imagenet/densenet121", "imagenet/densenet121", "Caltech", 0.881, 0.01},
        {"imagenet/densenet121", "imagenet/densenet121", "Indoor", 0.850, 0.05},
        {"imagenet/densenet121", "imagenet/densenet121", "Birds", 0.842, 0.05},
        {"imagenet/densenet121", "imagenet/densenet121", "Cars", 0.831, 0.5},
        {"imagenet/densenet121", "imagenet/densenet121", "Aircrafts", 0.817, 0.1},
        {"imagenet/densenet121", "imagenet/densenet121", "Flowers", 0.821, 0.5},
        {"imagenet/mobilenet1.0", "imagenet/mobilenet1.0", "Dogs", 0.852, 0.01},
        {"imagenet/mobilenet1.0", "imagenet/mobilenet1.0", "Caltech", 0.878, 0.01},
        {"imagenet/mobilenet1.0", "imagenet/mobilenet1.0", "Indoor", 0.839, 0.01},
        {"imagenet/mobilenet1.0", "imagenet/mobilenet1.0", "Birds", 0.849, 0.1},
        {"imagenet/mobilenet1.0", "imagenet/mobilenet1.0", "Cars", 0.830, 1.0},
        {"imagenet/mobilenet1.0", "imagenet/mobilenet1.0", "Aircrafts", 0.831, 1.0},
        {"imagenet/mobilenet1.0", "imagenet/mobilenet1.0", "Flowers", 0.825, 0.1},
        {"inat2017/resnet101", "imagenet/resnet101", "Dogs", 0.854, 0.05},
        {"inat2017/resnet101", "imagenet/resnet101", "Caltech", 0.871, 0.1},
        {"inat2017/resnet101", "imagenet/resnet101", "Indoor", 0.843, 0.1},
        {"inat2017/resnet101", "imagenet/resnet101", "Birds", 0.901, 0.005},
        {"inat2017/resnet101", "imagenet/resnet101", "Cars", 0.847, 1.0},
        {"inat2017/resnet101", "imagenet/resnet101", "Aircrafts", 0.846, 0.5},
        {"inat2017/resnet101", "imagenet/resnet101", "Flowers", 0.879, 0.1},
        {"places365/resnet101", "imagenet/resnet101", "Dogs", 0.856, 0.5},
        {"places365/resnet101", "imagenet/resnet101", "Caltech", 0.888, 0.05},
        {"places365/resnet101", "imagenet/resnet101", "Indoor", 0.901, 0.05},
        {"places365/resnet101", "imagenet/resnet101", "Birds", 0.861, 0.5},
        {"places365/resnet101", "imagenet/resnet101", "Cars", 0.864, 1.0},
        {"places365/resnet101", "imagenet/resnet101", "Aircrafts", 0.853, 0.5},
        {"places365/resnet101", "imagenet/resnet101", "Flowers", 0.851, 1.0},
    };
    std::vector<ReferenceEntry> db;
    db.reserve(std::size(kRows));
    for (const auto& row : kRows) {
        ReferenceEntry entry{row.model, row.extractor, row.target, row.sim, row.elr};
        entry.validate();
        db.push_back(std::move(entry));
    }
    return db;
}

std::vector<ReferenceEntry> load_reference_db(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open reference db '" + path + "'");
    }
    std::vector<ReferenceEntry> db;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        if (!saw_header) {
            if (trimmed != "source_model,extractor,target,sim,optimal_elr") {
                throw ParseError(path, line_no,
                                 "expected header source_model,extractor,target,sim,optimal_elr");
            }
            saw_header = true;
            continue;
        }
        const std::vector<std::string_view> fields = detail::split_csv(line);
        if (fields.size() != 5) {
            throw ParseError(path, line_no, "expected 5 fields, got " +
                                                std::to_string(fields.size()));
        }
        ReferenceEntry entry;
        entry.source_model = std::string(fields[0]);
        entry.extractor = std::string(fields[1]);
        entry.target_name = std::string(fields[2]);
        if (!detail::parse_double(fields[3], entry.sim)) {
            throw ParseError(path, line_no, "bad sim value '" + std::string(fields[3]) + "'");
        }
        if (!detail::parse_double(fields[4], entry.optimal_elr)) {
            throw ParseError(path, line_no,
                             "bad optimal_elr value '" + std::string(fields[4]) + "'");
        }
        try {
            entry.validate();
        } catch (const Error& e) {
            throw ParseError(path, line_no, e.what());
        }
        db.push_back(std::move(entry));
    }
    return db;
}

ElrBucket elr_bucket(double elr) {
    if (!std::isfinite(elr) || elr <= 0.0) {
        throw InvalidInput("elr must be positive to form a decade bucket");
    }
    if (elr == 1.0) {
        return {0.1, 1.0};  // the top bucket is closed above
    }
    int k = static_cast<int>(std::floor(std::log10(elr)));
    // log10 rounding can land one decade off near exact powers of ten.
    while (std::pow(10.0, k) > elr) --k;
    while (std::pow(10.0, k + 1) <= elr) ++k;
    return {std::pow(10.0, k), std::pow(10.0, k + 1)};
}

Recommendation recommend_elr(const std::vector<ReferenceEntry>& db,
                             const std::string& source_model, double sim_score,
                             const std::string& query_extractor) {
    if (!std::isfinite(sim_score)) {
        throw InvalidInput("similarity score must be finite");
    }
    const ReferenceEntry* nearest = nullptr;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const ReferenceEntry& entry : db) {
        if (entry.source_model != source_model) continue;
        entry.validate();
        const double gap = std::abs(entry.sim - sim_score);
        if (nearest == nullptr || gap < best_gap ||
            (gap == best_gap && entry.target_name < nearest->target_name)) {
            nearest = &entry;
            best_gap = gap;
        }
    }
    if (nearest == nullptr) {
        throw LookupError("no reference entries for source model '" + source_model + "'");
    }
    Recommendation rec;
    rec.nearest = *nearest;
    rec.elr = nearest->optimal_elr;
    rec.bucket = elr_bucket(rec.elr);
    rec.sim_gap = best_gap;
    if (!query_extractor.empty() && query_extractor != nearest->extractor) {
        rec.warning = "query features come from extractor '" + query_extractor +
                      "' but the reference scores use '" + nearest->extractor +
                      "'; similarity scales may differ";
    }
    return rec;
}

}  // namespace ftk
