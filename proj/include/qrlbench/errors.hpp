#pragma once

#include <stdexcept>
#include <string>

namespace qrlbench {

/// A rejection sampler ran out of budget before finding an admissible draw.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; `path` names the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string &message)
        : std::runtime_error(path + ": " + message), path_(std::move(path))
    {
    }

    const std::string &path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace qrlbench
