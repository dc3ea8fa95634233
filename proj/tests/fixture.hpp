#pragma once

#include <string>
#include <vector>

#include "cornyield/dataset.hpp"
#include "cornyield/model.hpp"
#include "cornyield/synthetic.hpp"

namespace testing {

inline const std::vector<std::string>& selected_features() {
    static const std::vector<std::string> f{"avg_min_temp_c", "avg_precip_mm", "avg_wind_ms", "soil_ph",
                                            "sand_pct",       "silt_pct",      "cultivation_area_ha"};
    return f;
}

/// Cleaned synthetic table with the state column one-hot encoded.
inline const cornyield::data::Dataset& synthetic_table() {
    static const cornyield::data::Dataset d = [] {
        const auto schema = cornyield::synth::canonical_schema();
        const auto raw = cornyield::data::parse_csv(cornyield::synth::dataset_csv({}), schema);
        return cornyield::data::one_hot(cornyield::data::clean(raw), "state", cornyield::synth::states());
    }();
    return d;
}

inline cornyield::model::FeatureLayout synthetic_layout() {
    return cornyield::model::FeatureLayout::from_dataset(synthetic_table(), selected_features());
}

}  // namespace testing
