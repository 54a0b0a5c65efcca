#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Invalid model/data/config combinations detected before or while running.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Dataset could not be split as requested (e.g. a node would end up empty).
class partition_error : public std::runtime_error {
public:
    explicit partition_error(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite parameter. Carries the iteration index.
class numerical_error : public std::runtime_error {
public:
    numerical_error(const std::string& what, long long iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    long long iteration() const { return iteration_; }

private:
    long long iteration_;
};

// Resource budget too small for the run to be feasible at all.
class budget_error : public std::runtime_error {
public:
    explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Bug guard: a protocol participant was driven out of order.
class protocol_error : public std::logic_error {
public:
    explicit protocol_error(const std::string& what) : std::logic_error(what) {}
};

} // namespace fedsim
