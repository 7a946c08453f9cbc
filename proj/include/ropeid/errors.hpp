#pragma once

#include <stdexcept>
#include <string>

namespace ropeid {

// Bad arguments, violated preconditions, malformed files. CLI exit code 2.
struct precondition_error : std::invalid_argument {
    explicit precondition_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numerical failures during simulation or optimization. CLI exit code 3.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A particle or point left the valid grid region.
struct out_of_domain_error : numeric_error {
    int index;
    double time;
    out_of_domain_error(const std::string& msg, int index_, double time_)
        : numeric_error(msg), index(index_), time(time_) {}
};

struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ropeid
