#include "experiment_config.hpp"

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

namespace pottsvb::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
    throw config_error(pointer + ": " + what);
}

void reject_unknown_keys(const json& j, const std::string& pointer,
                         const std::set<std::string>& known) {
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            fail(pointer + "/" + key, "unknown key");
        }
    }
}

double get_number(const json& j, const std::string& pointer) {
    if (!j.is_number()) fail(pointer, "expected a number");
    return j.get<double>();
}

int get_int(const json& j, const std::string& pointer) {
    if (!j.is_number_integer()) fail(pointer, "expected an integer");
    return j.get<int>();
}

std::string get_string(const json& j, const std::string& pointer) {
    if (!j.is_string()) fail(pointer, "expected a string");
    return j.get<std::string>();
}

PhantomSpec parse_phantom(const json& j, const std::string& pointer) {
    if (!j.is_object()) fail(pointer, "expected an object");
    reject_unknown_keys(j, pointer, {"height", "width", "classes", "means", "stddevs"});

    const int classes = j.contains("classes") ? get_int(j["classes"], pointer + "/classes") : 4;
    if (classes < 1) fail(pointer + "/classes", "must be >= 1");
    PhantomSpec spec = PhantomSpec::with_classes(classes);
    if (j.contains("height")) spec.height = get_int(j["height"], pointer + "/height");
    if (j.contains("width")) spec.width = get_int(j["width"], pointer + "/width");
    if (spec.height < 1 || spec.width < 1) fail(pointer, "height/width must be >= 1");

    auto parse_array = [&](const char* key, std::vector<double>& out) {
        const json& arr = j[key];
        const std::string where = pointer + "/" + key;
        if (!arr.is_array()) fail(where, "expected an array");
        if (static_cast<int>(arr.size()) != classes) {
            fail(where, "expected " + std::to_string(classes) + " entries");
        }
        out.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            out.push_back(get_number(arr[i], where + "/" + std::to_string(i)));
        }
    };
    if (j.contains("means")) parse_array("means", spec.class_means);
    if (j.contains("stddevs")) parse_array("stddevs", spec.class_stddevs);
    return spec;
}

} // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw config_error("cannot open config file: " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw config_error(std::string("/: not valid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) fail("/", "expected a JSON object");
    reject_unknown_keys(j, "", {"seed", "repetitions", "labels_per_class", "methods", "beta",
                                "beta_max", "max_iterations", "tolerance", "source", "target"});

    ExperimentConfig config;

    if (!j.contains("methods")) fail("/methods", "required key is missing");
    const json& methods = j["methods"];
    if (!methods.is_array() || methods.empty()) fail("/methods", "expected a non-empty array");
    for (std::size_t i = 0; i < methods.size(); ++i) {
        const std::string where = "/methods/" + std::to_string(i);
        const std::string name = get_string(methods[i], where);
        try {
            config.methods.push_back(method_from_string(name));
        } catch (const std::invalid_argument&) {
            fail(where, "unknown method \"" + name + "\" (expected UGM, SGM, UHP, SHP or 1NN)");
        }
    }

    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
            fail("/seed", "expected an integer");
        }
        config.base_seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("repetitions")) {
        config.repetitions = get_int(j["repetitions"], "/repetitions");
        if (config.repetitions < 1) fail("/repetitions", "must be >= 1");
    }
    if (j.contains("labels_per_class")) {
        config.labels_per_class = get_int(j["labels_per_class"], "/labels_per_class");
        if (config.labels_per_class < 0) fail("/labels_per_class", "must be >= 0");
    }
    if (j.contains("beta_max")) {
        config.beta_max = get_number(j["beta_max"], "/beta_max");
        if (!(config.beta_max > 0.0)) fail("/beta_max", "must be > 0");
    }
    if (j.contains("max_iterations")) {
        config.vb.max_iterations = get_int(j["max_iterations"], "/max_iterations");
        if (config.vb.max_iterations < 1) fail("/max_iterations", "must be >= 1");
    }
    if (j.contains("tolerance")) {
        config.vb.tolerance = get_number(j["tolerance"], "/tolerance");
        if (!(config.vb.tolerance > 0.0)) fail("/tolerance", "must be > 0");
    }

    if (j.contains("beta")) {
        const json& beta = j["beta"];
        if (!beta.is_object()) fail("/beta", "expected an object");
        reject_unknown_keys(beta, "/beta", {"source", "value"});
        const std::string source =
            beta.contains("source") ? get_string(beta["source"], "/beta/source") : "fitted";
        if (source == "fitted") {
            config.beta_fitted = true;
            if (beta.contains("value")) {
                fail("/beta/value", "only valid with source \"fixed\"");
            }
        } else if (source == "fixed") {
            config.beta_fitted = false;
            if (beta.contains("value")) {
                config.beta_fixed = get_number(beta["value"], "/beta/value");
                if (config.beta_fixed < 0.0) fail("/beta/value", "must be >= 0");
            }
        } else {
            fail("/beta/source", "expected \"fitted\" or \"fixed\"");
        }
    }

    if (j.contains("source")) {
        const json& source = j["source"];
        if (!source.is_object()) fail("/source", "expected an object");
        reject_unknown_keys(source, "/source", {"phantom", "labels", "count"});
        if (source.contains("labels")) {
            if (source.contains("phantom")) {
                fail("/source", "give either \"phantom\" or \"labels\", not both");
            }
            const json& labels = source["labels"];
            if (!labels.is_array() || labels.empty()) {
                fail("/source/labels", "expected a non-empty array of paths");
            }
            for (std::size_t i = 0; i < labels.size(); ++i) {
                config.source_label_paths.push_back(
                    get_string(labels[i], "/source/labels/" + std::to_string(i)));
            }
        } else if (source.contains("phantom")) {
            config.source_phantom = parse_phantom(source["phantom"], "/source/phantom");
        }
        if (source.contains("count")) {
            config.source_count = get_int(source["count"], "/source/count");
            if (config.source_count < 1) fail("/source/count", "must be >= 1");
        }
    }

    if (j.contains("target")) {
        const json& target = j["target"];
        if (!target.is_object()) fail("/target", "expected an object");
        reject_unknown_keys(target, "/target", {"phantom", "inputs"});
        if (target.contains("inputs")) {
            if (target.contains("phantom")) {
                fail("/target", "give either \"phantom\" or \"inputs\", not both");
            }
            const json& inputs = target["inputs"];
            if (!inputs.is_array() || inputs.empty()) {
                fail("/target/inputs", "expected a non-empty array");
            }
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                const std::string where = "/target/inputs/" + std::to_string(i);
                const json& entry = inputs[i];
                if (!entry.is_object()) fail(where, "expected an object");
                reject_unknown_keys(entry, where, {"image", "labels", "mask"});
                TargetInput input;
                for (const char* key : {"image", "labels", "mask"}) {
                    if (!entry.contains(key)) {
                        fail(where + "/" + key, "required key is missing");
                    }
                }
                input.image_path = get_string(entry["image"], where + "/image");
                input.labels_path = get_string(entry["labels"], where + "/labels");
                input.mask_path = get_string(entry["mask"], where + "/mask");
                config.target_inputs.push_back(std::move(input));
            }
        } else if (target.contains("phantom")) {
            config.target_phantom = parse_phantom(target["phantom"], "/target/phantom");
        }
    }

    return config;
}

} // namespace pottsvb::cli
