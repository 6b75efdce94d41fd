#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xferlab {

/// Base class for every error raised by the library. `tag()` is a short,
/// stable identifier used in failed-trial records.
class Error : public std::runtime_error {
public:
    Error(std::string tag, const std::string& what)
        : std::runtime_error(what), tag_(std::move(tag)) {}

    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error("contract", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class IndexError : public Error {
public:
    explicit IndexError(const std::string& what) : Error("index", what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class UnsupportedError : public Error {
public:
    explicit UnsupportedError(const std::string& what) : Error("unsupported", what) {}
};

/// Fewer than the requested number of singular values exceed the degeneracy
/// threshold.
class DegenerateRankError : public Error {
public:
    DegenerateRankError(std::size_t requested, std::size_t observed)
        : Error("degenerate_rank",
                "requested rank " + std::to_string(requested) + " but numerical rank is " +
                    std::to_string(observed)),
          requested_(requested),
          observed_(observed) {}

    std::size_t requested() const noexcept { return requested_; }
    std::size_t observed_rank() const noexcept { return observed_; }

private:
    std::size_t requested_;
    std::size_t observed_;
};

/// Task-diversity floor could not be met by resampling.
class DiversityError : public Error {
public:
    DiversityError(double best, double floor)
        : Error("diversity", "task diversity " + std::to_string(best) + " below floor " +
                                 std::to_string(floor) + " after retries"),
          best_(best) {}

    double best_sigma_r() const noexcept { return best_; }

private:
    double best_;
};

/// Adversarial training zeroed out too many source tasks for a rank-r SVD.
class AllSuppressedError : public Error {
public:
    AllSuppressedError(double epsilon, std::size_t surviving, std::size_t rank)
        : Error("all_suppressed", "epsilon " + std::to_string(epsilon) + " left " +
                                      std::to_string(surviving) +
                                      " non-suppressed tasks, need at least " +
                                      std::to_string(rank)),
          epsilon_(epsilon),
          surviving_(surviving) {}

    double epsilon() const noexcept { return epsilon_; }
    std::size_t surviving() const noexcept { return surviving_; }

private:
    double epsilon_;
    std::size_t surviving_;
};

class DegenerateClassifierError : public Error {
public:
    explicit DegenerateClassifierError(const std::string& what)
        : Error("degenerate_classifier", what) {}
};

}  // namespace xferlab
