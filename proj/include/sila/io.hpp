#pragma once

#include "sila/experiments.hpp"
#include "sila/frames.hpp"
#include "sila/metrics.hpp"
#include "sila/model.hpp"
#include "sila/predictor.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sila {

/// Version written to and required in every JSON file.
inline constexpr int kFormatVersion = 1;

/// Writes content to a temporary sibling and renames it over path.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Model JSON with sorted keys and 17-significant-digit numbers. Each GP
/// stores its pseudo-inputs, hyperparameters, training count, and the
/// posterior over the pseudo-input values (inducing_mean, inducing_cov).
std::string model_to_json(const Model& model);
/// Throws DataError naming the line or field on malformed input and on an
/// unsupported version. `source` names the input in messages.
Model model_from_json(const std::string& text, const std::string& source = "model");
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// `traj_id,t,x,y` rows grouped by trajectory; frame ids are not stored.
std::string trajectories_to_csv(std::span<const RawTrajectory> trajs);
/// Rows of one trajectory must be contiguous. Every trajectory gets
/// frame_id.
std::vector<RawTrajectory> trajectories_from_csv(const std::string& text, const std::string& frame_id,
                                                 const std::string& source = "trajectories");

std::string frames_to_json(std::span<const IntersectionFrame> frames);
std::vector<IntersectionFrame> frames_from_json(const std::string& text, const std::string& source = "frames");

/// Reads <dir>/trajectories.csv and <dir>/frames.json. The CSV's
/// trajectories belong to the first frame unless a `frame_id` column is
/// present; in that case it selects the frame per row.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& data, const std::filesystem::path& dir);

std::string predictions_to_json(const NormalizedTrajectory& observation, const PredictionSet& preds);

std::string results_to_csv(std::span<const EpisodeRecord> records);
std::vector<EpisodeRecord> results_from_csv(const std::string& text, const std::string& source = "results");
std::string summary_to_csv(const Summary& summary);
std::string report_to_json(const EvalReport& report);

}  // namespace sila
