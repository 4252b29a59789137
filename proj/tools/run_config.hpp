#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace resdiff::cli {

/// Flat key=value run configuration. Unknown keys are rejected; every
/// command writes the fully resolved table next to its outputs so a run can
/// be replayed from that file alone.
class RunConfig {
public:
    RunConfig();  // defaults

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);  // "key=value" overrides
    void set_pair(const std::string& pair);

    const std::string& str(const std::string& key) const;
    double num(const std::string& key) const;
    int integer(const std::string& key) const;
    std::uint64_t seed(const std::string& key) const;
    bool flag(const std::string& key) const;  // "0"/"1"

    std::string resolved_text() const;
    void write_resolved(const std::string& dir) const;

    /// Output directory: out_dir resolved against $RESDIFF_OUT when relative.
    std::string output_dir() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace resdiff::cli
