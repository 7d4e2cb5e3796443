#pragma once

#include <stdexcept>
#include <string>

namespace distcal {

// Distribution constructed with parameters outside its validity domain.
class ParameterDomainError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Numeric argument outside the operation's domain (e.g. quantile level not in (0,1)).
class DomainError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Discretization interval collapsed to nothing.
class DegenerateTargetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Character or tag not present in the vocabulary.
class VocabularyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Token prefix does not name a trie node.
class TriePathError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Input sequence longer than the model's context window.
class ContextLengthError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient encountered during optimization.
class TrainingDivergedError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Failure while computing or writing evaluation results.
class EvaluationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace distcal
