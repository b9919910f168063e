#pragma once

#include <stdexcept>
#include <string>

namespace illusion {

// Contract violations: bad arguments, inconsistent data, failed guarantees.
class ValidationError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

} // namespace illusion
