#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed model file, dimension mismatch, invalid flags.
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(int line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line), message_(what) {}
    int line() const noexcept { return line_; }
    const std::string& message() const noexcept { return message_; }

private:
    int line_;
    std::string message_;
};

/// An iterative numerical routine failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// The mean-path boundary-value problem has no unique solution.
class SingularSystem : public Error {
public:
    SingularSystem(const std::string& what, double det) : Error(what), det_(det) {}
    double determinant() const noexcept { return det_; }

private:
    double det_;
};

class RiccatiBlowup : public Error {
public:
    RiccatiBlowup(const std::string& what, double time) : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

} // namespace mfg
