#include "run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "resdiff/io.hpp"

namespace resdiff::cli {

RunConfig::RunConfig() {
    values_ = {
        {"task", "gaussian-2d"},
        {"T", "1000"},
        {"schedule_source", "auto"},        // power | ddim | auto (per task mode)
        {"alpha_exponent", "1"},
        {"beta_exponent", "1"},
        {"ddim_family", "linear"},
        {"variance_mode", "sum-constrained"},
        {"eta", "0"},
        {"beta_bar_T_sq", ""},              // empty = task default
        {"method", "sm-res-n"},
        {"path_mode", "simultaneous"},
        {"steps", "10"},
        {"samples", "1000"},
        {"seed", "1"},
        {"iterations", "5000"},
        {"batch_size", "16"},
        {"learning_rate", "0.002"},
        {"loss", "l2"},
        {"time_condition", "reparameterized"},
        {"predictor", "oracle"},            // ground-truth | oracle | checkpoint
        {"checkpoint", ""},
        {"checkpoint_role", "residual"},
        {"checkpoint_res", ""},
        {"checkpoint_noise", ""},
        {"adjust_mode", "alpha+beta"},
        {"adjust_exponent", "1"},
        {"dump_trajectory", "0"},
        {"inject_fault", "none"},
        {"aosa_delta", "0.01"},
        {"lambda_lr_scale", "0.1"},
        {"out_dir", "out"},
    };
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto pos = line.find('=');
        if (pos == std::string::npos) {
            throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                        ": expected key=value");
        }
        set(line.substr(0, pos), line.substr(pos + 1));
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("config: unknown key: " + key);
    it->second = value;
}

void RunConfig::set_pair(const std::string& pair) {
    const auto pos = pair.find('=');
    if (pos == std::string::npos) {
        throw std::invalid_argument("config: override must be key=value, got: " + pair);
    }
    set(pair.substr(0, pos), pair.substr(pos + 1));
}

const std::string& RunConfig::str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("config: unknown key: " + key);
    return it->second;
}

double RunConfig::num(const std::string& key) const {
    const std::string& v = str(key);
    try {
        std::size_t used = 0;
        const double parsed = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return parsed;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' is not a number: " + v);
    }
}

int RunConfig::integer(const std::string& key) const {
    const double v = num(key);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) {
        throw std::invalid_argument("config: key '" + key + "' is not an integer");
    }
    return i;
}

std::uint64_t RunConfig::seed(const std::string& key) const {
    const std::string& v = str(key);
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' is not a seed: " + v);
    }
}

bool RunConfig::flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "0") return false;
    if (v == "1") return true;
    throw std::invalid_argument("config: key '" + key + "' must be 0 or 1");
}

std::string RunConfig::resolved_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
    return os.str();
}

void RunConfig::write_resolved(const std::string& dir) const {
    write_text_file(dir + "/resolved-config.txt", resolved_text());
}

std::string RunConfig::output_dir() const {
    std::filesystem::path p = str("out_dir");
    if (p.is_relative()) {
        if (const char* root = std::getenv("RESDIFF_OUT")) p = std::filesystem::path(root) / p;
    }
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace resdiff::cli
