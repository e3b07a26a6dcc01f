#include "pottsvb/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pottsvb/errors.hpp"

namespace pottsvb {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "grid tensor payloads are little-endian");

constexpr char kMagic[8] = {'G', 'R', 'I', 'D', 'T', 'N', 'S', 'R'};

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) {
        throw io_error("cannot open for writing: " + path.string());
    }
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open for reading: " + path.string());
    }
    return in;
}

void write_tensor(const std::filesystem::path& path, const char* dtype, const char* kind,
                  int h, int w, int c, const void* payload, std::size_t payload_bytes) {
    std::ofstream out = open_out(path, true);
    out.write(kMagic, sizeof(kMagic));
    json header;
    header["dtype"] = dtype;
    header["shape"] = {h, w, c};
    header["kind"] = kind;
    const std::string line = header.dump();
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.put('\n');
    out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(payload_bytes));
    if (!out.good()) {
        throw io_error("write failed: " + path.string());
    }
}

struct TensorData {
    std::string dtype;
    std::string kind;
    int h = 0, w = 0, c = 0;
    std::vector<char> payload;
};

TensorData read_tensor(const std::filesystem::path& path, const char* expected_kind) {
    std::ifstream in = open_in(path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw io_error(path.string() + ": not a grid tensor file");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw io_error(path.string() + ": malformed header (missing header line)");
    }
    TensorData data;
    bool shape_ok = true;
    try {
        const json header = json::parse(line);
        data.dtype = header.at("dtype").get<std::string>();
        data.kind = header.at("kind").get<std::string>();
        const auto& shape = header.at("shape");
        if (!shape.is_array() || shape.size() != 3) {
            shape_ok = false;
        } else {
            data.h = shape[0].get<int>();
            data.w = shape[1].get<int>();
            data.c = shape[2].get<int>();
        }
    } catch (const json::exception& e) {
        throw io_error(path.string() + ": malformed header (" + e.what() + ")");
    }
    if (!shape_ok) {
        throw io_error(path.string() + ": malformed header (shape must have 3 entries)");
    }
    if (data.dtype != "f64" && data.dtype != "u8") {
        throw io_error(path.string() + ": malformed header (unknown dtype " + data.dtype + ")");
    }
    if (data.h < 1 || data.w < 1 || data.c < 1) {
        throw io_error(path.string() + ": malformed header (non-positive shape)");
    }
    if (data.kind != expected_kind) {
        throw io_error(path.string() + ": tensor kind is '" + data.kind + "', expected '" +
                       expected_kind + "'");
    }
    const std::size_t elem = data.dtype == "f64" ? sizeof(double) : 1;
    const std::size_t expected = static_cast<std::size_t>(data.h) * data.w * data.c * elem;
    data.payload.resize(expected);
    in.read(data.payload.data(), static_cast<std::streamsize>(expected));
    if (static_cast<std::size_t>(in.gcount()) != expected || in.peek() != EOF) {
        throw io_error(path.string() + ": payload length mismatch");
    }
    return data;
}

std::string fmt_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

json write_json_matrix(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd read_json_matrix(const json& rows) {
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    if (r == 0) throw io_error("matrix has no rows");
    const Eigen::Index c = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c) {
            throw io_error("matrix rows have inconsistent lengths");
        }
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
        }
    }
    return m;
}

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw io_error(path.string() + ": malformed JSON (" + std::string(e.what()) + ")");
    }
}

const json& require_key(const json& j, const char* key, const std::filesystem::path& path) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw io_error(path.string() + ": missing key \"" + key + "\"");
    }
    return *it;
}

} // namespace

void write_grid(const std::filesystem::path& path, const ImageGrid& image) {
    write_tensor(path, "f64", "image", image.height(), image.width(), image.channels(),
                 image.data().data(), image.data().size() * sizeof(double));
}

void write_grid(const std::filesystem::path& path, const LabelField& labels) {
    if (labels.num_classes() > 256) {
        throw io_error("write_grid: label tensors support at most 256 classes");
    }
    std::vector<std::uint8_t> bytes(labels.labels().begin(), labels.labels().end());
    write_tensor(path, "u8", "labels", labels.height(), labels.width(), 1, bytes.data(),
                 bytes.size());
}

void write_grid(const std::filesystem::path& path, const ResponsibilityField& rho) {
    write_tensor(path, "f64", "resp", rho.height(), rho.width(), rho.num_classes(),
                 rho.values().data(), rho.values().size() * sizeof(double));
}

void write_grid(const std::filesystem::path& path, const Mask& mask) {
    write_tensor(path, "u8", "mask", mask.height(), mask.width(), 1, mask.values().data(),
                 mask.values().size());
}

ImageGrid read_image(const std::filesystem::path& path) {
    TensorData data = read_tensor(path, "image");
    if (data.dtype != "f64") {
        throw io_error(path.string() + ": image tensors must be f64");
    }
    std::vector<double> values(static_cast<std::size_t>(data.h) * data.w * data.c);
    std::memcpy(values.data(), data.payload.data(), data.payload.size());
    return {data.h, data.w, data.c, std::move(values)};
}

LabelField read_labels(const std::filesystem::path& path) {
    TensorData data = read_tensor(path, "labels");
    if (data.dtype != "u8" || data.c != 1) {
        throw io_error(path.string() + ": label tensors must be u8 with one channel");
    }
    std::vector<int> labels(data.payload.size());
    int max_label = 0;
    for (std::size_t i = 0; i < data.payload.size(); ++i) {
        labels[i] = static_cast<std::uint8_t>(data.payload[i]);
        max_label = std::max(max_label, labels[i]);
    }
    return {data.h, data.w, max_label + 1, std::move(labels)};
}

ResponsibilityField read_resp(const std::filesystem::path& path) {
    TensorData data = read_tensor(path, "resp");
    if (data.dtype != "f64") {
        throw io_error(path.string() + ": responsibility tensors must be f64");
    }
    std::vector<double> values(static_cast<std::size_t>(data.h) * data.w * data.c);
    std::memcpy(values.data(), data.payload.data(), data.payload.size());
    return {data.h, data.w, data.c, std::move(values)};
}

Mask read_mask(const std::filesystem::path& path) {
    TensorData data = read_tensor(path, "mask");
    if (data.dtype != "u8" || data.c != 1) {
        throw io_error(path.string() + ": mask tensors must be u8 with one channel");
    }
    std::vector<std::uint8_t> values(data.payload.begin(), data.payload.end());
    return {data.h, data.w, std::move(values)};
}

void export_pgm(const std::filesystem::path& path, const LabelField& labels) {
    std::ofstream out = open_out(path, true);
    out << "P5\n" << labels.width() << " " << labels.height() << "\n255\n";
    const int kk = labels.num_classes();
    for (int i = 0; i < labels.voxel_count(); ++i) {
        const int byte = kk > 1 ? 255 * labels.label(i) / (kk - 1) : 0;
        out.put(static_cast<char>(byte));
    }
    if (!out.good()) {
        throw io_error("write failed: " + path.string());
    }
}

void export_pgm(const std::filesystem::path& path, const ImageGrid& image) {
    std::ofstream out = open_out(path, true);
    out << "P5\n" << image.width() << " " << image.height() << "\n255\n";
    for (int i = 0; i < image.voxel_count(); ++i) {
        const double v = std::clamp(image.value(i, 0), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<int>(std::floor(v * 255.0))));
    }
    if (!out.good()) {
        throw io_error("write failed: " + path.string());
    }
}

void write_beta(const std::filesystem::path& path, const BetaFile& beta) {
    json j;
    j["beta"] = beta.beta;
    j["beta_max"] = beta.beta_max;
    j["iterations"] = beta.iterations;
    j["objective"] = beta.objective;
    std::ofstream out = open_out(path, false);
    out << j.dump(2) << "\n";
    if (!out.good()) {
        throw io_error("write failed: " + path.string());
    }
}

BetaFile read_beta(const std::filesystem::path& path) {
    const json j = parse_json_file(path);
    BetaFile beta;
    try {
        beta.beta = require_key(j, "beta", path).get<std::vector<double>>();
        beta.beta_max = require_key(j, "beta_max", path).get<double>();
        beta.iterations = require_key(j, "iterations", path).get<int>();
        beta.objective = require_key(j, "objective", path).get<double>();
    } catch (const json::exception& e) {
        throw io_error(path.string() + ": malformed beta file (" + e.what() + ")");
    }
    return beta;
}

void write_hyperparams(const std::filesystem::path& path, const Hyperparams& params) {
    json classes = json::array();
    for (int k = 0; k < params.num_classes(); ++k) {
        const ClassHyperparams& c = params.cls(k);
        json entry;
        entry["alpha"] = c.alpha;
        entry["upsilon"] = std::vector<double>(c.upsilon.data(), c.upsilon.data() + c.upsilon.size());
        entry["gamma"] = c.gamma;
        entry["nu"] = c.nu;
        entry["delta"] = write_json_matrix(c.delta);
        classes.push_back(std::move(entry));
    }
    json j;
    j["classes"] = std::move(classes);
    std::ofstream out = open_out(path, false);
    out << j.dump(2) << "\n";
    if (!out.good()) {
        throw io_error("write failed: " + path.string());
    }
}

Hyperparams read_hyperparams(const std::filesystem::path& path) {
    const json j = parse_json_file(path);
    std::vector<ClassHyperparams> classes;
    try {
        for (const json& entry : require_key(j, "classes", path)) {
            ClassHyperparams c;
            c.alpha = entry.at("alpha").get<double>();
            const auto ups = entry.at("upsilon").get<std::vector<double>>();
            c.upsilon = Eigen::Map<const Eigen::VectorXd>(ups.data(),
                                                          static_cast<Eigen::Index>(ups.size()));
            c.gamma = entry.at("gamma").get<double>();
            c.nu = entry.at("nu").get<double>();
            c.delta = read_json_matrix(entry.at("delta"));
            classes.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw io_error(path.string() + ": malformed hyperparameter file (" + e.what() + ")");
    }
    return Hyperparams(std::move(classes));
}

void write_labeled_voxels(const std::filesystem::path& path, const LabeledVoxelSet& labeled) {
    json j = json::array();
    for (const LabeledVoxel& lv : labeled) {
        j.push_back({{"index", lv.index}, {"class", lv.class_index}});
    }
    std::ofstream out = open_out(path, false);
    out << j.dump(2) << "\n";
    if (!out.good()) {
        throw io_error("write failed: " + path.string());
    }
}

LabeledVoxelSet read_labeled_voxels(const std::filesystem::path& path, const ImageGrid& image,
                                    int num_classes) {
    const json j = parse_json_file(path);
    if (!j.is_array()) {
        throw io_error(path.string() + ": expected a JSON list of {index, class}");
    }
    LabeledVoxelSet out;
    for (const json& entry : j) {
        LabeledVoxel lv;
        try {
            lv.index = require_key(entry, "index", path).get<int>();
            lv.class_index = require_key(entry, "class", path).get<int>();
        } catch (const json::exception& e) {
            throw io_error(path.string() + ": malformed labeled voxel entry (" + e.what() + ")");
        }
        if (lv.index < 0 || lv.index >= image.voxel_count()) {
            throw io_error(path.string() + ": voxel index " + std::to_string(lv.index) +
                           " out of range");
        }
        if (lv.class_index < 0 || lv.class_index >= num_classes) {
            throw io_error(path.string() + ": class index " + std::to_string(lv.class_index) +
                           " out of range");
        }
        const auto x = image.voxel(lv.index);
        lv.intensity.resize(image.channels());
        for (int d = 0; d < image.channels(); ++d) {
            lv.intensity(d) = x[static_cast<std::size_t>(d)];
        }
        out.push_back(std::move(lv));
    }
    return out;
}

void write_results_csv(const std::filesystem::path& path, const ResultsTable& table) {
    std::ofstream out = open_out(path, false);
    out << "method,repetition,error,runtime_ms\n";
    for (const MethodResult& row : table.rows) {
        for (std::size_t rep = 0; rep < row.errors.size(); ++rep) {
            out << to_string(row.method) << "," << rep << "," << fmt_g6(row.errors[rep])
                << ",0\n";
        }
    }
    if (!out.good()) {
        throw io_error("write failed: " + path.string());
    }
}

void write_summary_csv(const std::filesystem::path& path, const ResultsTable& table) {
    std::ofstream out = open_out(path, false);
    out << "method,mean_error,sem,repetitions\n";
    for (const MethodResult& row : table.rows) {
        out << to_string(row.method) << "," << fmt_g6(row.mean_error) << "," << fmt_g6(row.sem)
            << "," << table.repetitions << "\n";
    }
    if (!out.good()) {
        throw io_error("write failed: " + path.string());
    }
}

} // namespace pottsvb
