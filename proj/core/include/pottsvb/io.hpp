#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pottsvb/evalbench.hpp"
#include "pottsvb/grid.hpp"
#include "pottsvb/init.hpp"
#include "pottsvb/potts.hpp"
#include "pottsvb/vb.hpp"

namespace pottsvb {

// Grid tensor files: 8-byte magic "GRIDTNSR", one newline-terminated JSON
// header line {"dtype", "shape", "kind"}, then the raw little-endian
// row-major payload. Round trips are bit-identical.

void write_grid(const std::filesystem::path& path, const ImageGrid& image);
void write_grid(const std::filesystem::path& path, const LabelField& labels);
void write_grid(const std::filesystem::path& path, const ResponsibilityField& rho);
void write_grid(const std::filesystem::path& path, const Mask& mask);

ImageGrid read_image(const std::filesystem::path& path);
LabelField read_labels(const std::filesystem::path& path);
ResponsibilityField read_resp(const std::filesystem::path& path);
Mask read_mask(const std::filesystem::path& path);

// Binary PGM (P5) rasters; labels are spread over the gray range, image
// intensities map [0, 1] -> [0, 255] with floor rounding.
void export_pgm(const std::filesystem::path& path, const LabelField& labels);
void export_pgm(const std::filesystem::path& path, const ImageGrid& image);

/// Fitted smoothness parameters with fit metadata.
struct BetaFile {
    std::vector<double> beta;
    double beta_max = 10.0;
    int iterations = 0;
    double objective = 0.0;
};

void write_beta(const std::filesystem::path& path, const BetaFile& beta);
BetaFile read_beta(const std::filesystem::path& path);

void write_hyperparams(const std::filesystem::path& path, const Hyperparams& params);
Hyperparams read_hyperparams(const std::filesystem::path& path);

/// Labeled voxels on disk are a JSON list of {"index", "class"}; the
/// intensity vectors are resolved against the image on read.
void write_labeled_voxels(const std::filesystem::path& path, const LabeledVoxelSet& labeled);
LabeledVoxelSet read_labeled_voxels(const std::filesystem::path& path, const ImageGrid& image,
                                    int num_classes);

// Experiment tables. Per-repetition rows are `method,repetition,error,runtime_ms`,
// the summary is `method,mean_error,sem,repetitions`; values use 6
// significant digits. The runtime_ms column is written as 0: output files
// carry no wall-clock entropy, so identical configurations produce
// byte-identical files (measured times are reported on stdout instead).
void write_results_csv(const std::filesystem::path& path, const ResultsTable& table);
void write_summary_csv(const std::filesystem::path& path, const ResultsTable& table);

} // namespace pottsvb
