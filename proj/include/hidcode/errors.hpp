#pragma once

#include <stdexcept>
#include <string>

namespace hidcode {

// Error categories map 1:1 onto CLI exit codes (1/2/3).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class InternalError : public std::runtime_error {
public:
    explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hidcode
