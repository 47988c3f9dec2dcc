#pragma once

#include <stdexcept>
#include <string>

namespace pushrl {

// Base for every error raised by the library. Callers that only care about
// "something in pushrl failed" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace pushrl
