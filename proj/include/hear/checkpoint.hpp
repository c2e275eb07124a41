#pragma once

// Binary checkpoint container.
//
// Layout (little endian):
//   "HEARCKPT"  8 bytes
//   version     u32 (1)
//   header_len  u64
//   header      JSON text; "tensors" lists {name, rows, cols} in payload order
//   payload     f64 row-major values of every tensor, back to back

#include "hear/dlm.hpp"
#include "hear/estimator.hpp"
#include "hear/vocab.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hear {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorBundle {
    nlohmann::json header = nlohmann::json::object();
    std::vector<std::pair<std::string, Matrix>> tensors;

    const Matrix& at(const std::string& name) const;
};

void write_bundle(const std::filesystem::path& path, const TensorBundle& bundle);
TensorBundle read_bundle(const std::filesystem::path& path);

// Parameter values in registration order, named as registered.
void append_parameters(TensorBundle& bundle, const nn::ParameterStore& params, const std::string& prefix = "");
// Copies values back by name; shapes must match exactly.
void load_parameters(const TensorBundle& bundle, nn::ParameterStore& params, const std::string& prefix = "");

void save_model(const std::filesystem::path& path, const DlmModel& model, const Vocabulary& vocab,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
    DlmModel model;
    Vocabulary vocab;
    nlohmann::json extra;
};
LoadedModel load_model(const std::filesystem::path& path);

void save_estimator(const std::filesystem::path& path, const EstimatorModel& estimator, const Vocabulary& vocab,
                    const nlohmann::json& extra = nlohmann::json::object());

struct LoadedEstimator {
    EstimatorModel model;
    Vocabulary vocab;
    nlohmann::json extra;
};
LoadedEstimator load_estimator(const std::filesystem::path& path);

}  // namespace hear
