#pragma once

#include <stdexcept>
#include <string>

namespace elastika {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Ingestion and preprocessing.
class AllZeroChannel : public Error { public: using Error::Error; };
class TooFewSamples : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class SchemaError : public Error { public: using Error::Error; };
class InvariantViolation : public Error { public: using Error::Error; };
class ChannelNotFound : public Error { public: using Error::Error; };

// Warps and alignment.
class NonMonotoneWarp : public Error { public: using Error::Error; };
class NegativePsi : public Error { public: using Error::Error; };
class GridMismatch : public Error { public: using Error::Error; };
class EmptyDataset : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

// Modes.
class IndexOutOfRange : public Error { public: using Error::Error; };
class SizeMismatch : public Error { public: using Error::Error; };

// Regression.
class NotNested : public Error { public: using Error::Error; };
class SingularResample : public Error { public: using Error::Error; };
class AllMissingTrait : public Error { public: using Error::Error; };

} // namespace elastika
