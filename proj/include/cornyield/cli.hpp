#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cornyield/config.hpp"
#include "cornyield/dataset.hpp"
#include "cornyield/feature_select.hpp"
#include "cornyield/model.hpp"

namespace cornyield::cli {

/// Runs one subcommand. `args` excludes the program name. Returns the exit
/// status; errors are reported on `err` as a single "error: <Code>: <message>" line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The cleaned, encoded and split dataset shared by the modelling commands.
struct Prepared {
    data::Dataset dataset;
    data::SplitResult split;
    fs::CorrelationReport correlation;
    std::vector<std::string> selected;
    std::vector<std::string> all_numeric;
    model::FeatureLayout layout;       // selected features
    model::FeatureLayout full_layout;  // every numeric explanatory variable
};

[[nodiscard]] Prepared prepare(const config::PipelineConfig& cfg);

/// Correlation sign of each variable, as used for direction flags.
[[nodiscard]] std::map<std::string, double> correlation_signs(const fs::CorrelationReport& r);

}  // namespace cornyield::cli
