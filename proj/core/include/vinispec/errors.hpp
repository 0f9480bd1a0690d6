#pragma once

#include <stdexcept>
#include <string>

namespace vinispec {

/// Base class for every error raised by the toolkit. Catching this is enough
/// to distinguish "bad input or bad state" from a programming bug.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A required CSV column is absent from the header.
class MissingColumnError : public Error { public: using Error::Error; };

/// A CSV cell could not be parsed as the required type.
class MalformedValueError : public Error { public: using Error::Error; };

/// A parsed value lies outside its documented range.
class OutOfRangeError : public Error { public: using Error::Error; };

/// Two rows share the same sample_id.
class DuplicateSampleIdError : public Error { public: using Error::Error; };

/// A synthesis configuration cannot produce a valid dataset.
class ConfigInfeasibleError : public Error { public: using Error::Error; };

/// A row lacks the label required by the requested task.
class MissingLabelError : public Error { public: using Error::Error; };

/// A row lacks a field required by the requested feature layout.
class MissingFieldError : public Error { public: using Error::Error; };

/// Fewer rows than the operation needs.
class TooFewRowsError : public Error { public: using Error::Error; };

/// Fewer samples than the cross-validation scheme needs.
class TooFewSamplesError : public Error { public: using Error::Error; };

/// Fewer groups than the cross-validation scheme needs.
class TooFewGroupsError : public Error { public: using Error::Error; };

/// Matrix or vector shapes do not agree.
class DimensionMismatchError : public Error { public: using Error::Error; };

/// An input or an intermediate quantity is NaN or infinite.
class NonFiniteError : public Error { public: using Error::Error; };

/// A classification fit was given a single distinct class.
class SingleClassError : public Error { public: using Error::Error; };

/// Training loss became NaN or infinite.
class DivergedLossError : public Error { public: using Error::Error; };

/// A score that divides by the target variance was given constant targets.
class ZeroVarianceError : public Error { public: using Error::Error; };

/// A top-k request exceeds the number of available items.
class KTooLargeError : public Error { public: using Error::Error; };

/// Report rows mix regression and classification metrics.
class MixedLayoutError : public Error { public: using Error::Error; };

/// A name or option value is not one of the documented choices.
class InvalidSpecError : public Error { public: using Error::Error; };

/// A file could not be read or written.
class IoError : public Error { public: using Error::Error; };

} // namespace vinispec
