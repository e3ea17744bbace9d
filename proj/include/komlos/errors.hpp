#pragma once

#include <stdexcept>
#include <string>

namespace komlos {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

struct ColumnNormExceeded : Error {
    int index;
    double norm;
    ColumnNormExceeded(int index_, double norm_)
        : Error("column " + std::to_string(index_) + " has 2-norm " +
                std::to_string(norm_) + " > 1 + tolerance"),
          index(index_),
          norm(norm_) {}
};

struct TooLarge : Error {
    explicit TooLarge(const std::string& what) : Error(what) {}
};

struct NumericalFailure : Error {
    explicit NumericalFailure(const std::string& what) : Error(what) {}
};

struct MaxRejectionsExceeded : Error {
    int attempts;
    explicit MaxRejectionsExceeded(int attempts_)
        : Error("acceptance window not hit after " + std::to_string(attempts_) +
                " rejections"),
          attempts(attempts_) {}
};

struct EmptySampleSet : Error {
    EmptySampleSet() : Error("empty sample set") {}
};

struct AttemptsExhausted : Error {
    int kept_so_far;
    explicit AttemptsExhausted(int kept)
        : Error("attempts exhausted with " + std::to_string(kept) +
                " members kept"),
          kept_so_far(kept) {}
};

struct OddN : Error {
    explicit OddN(int n) : Error("n must be even, got " + std::to_string(n)) {}
};

struct ParityViolation : Error {
    explicit ParityViolation(const std::string& what) : Error(what) {}
};

struct ParityMismatch : Error {
    explicit ParityMismatch(const std::string& what) : Error(what) {}
};

struct PreconditionViolated : Error {
    explicit PreconditionViolated(const std::string& what) : Error(what) {}
};

struct InvalidEnsembleParams : Error {
    explicit InvalidEnsembleParams(const std::string& what) : Error(what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace komlos
