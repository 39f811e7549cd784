#pragma once

#include <stdexcept>
#include <string>

namespace cmar {

// Bad input: unreadable files, malformed records, dangling references,
// invalid configuration values. The CLI maps these to exit status 2.
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// Failure while computing on structurally valid input: degenerate data,
// iteration caps, non-finite values. The CLI maps these to exit status 1.
class computation_error : public std::runtime_error {
public:
    explicit computation_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cmar
