#pragma once

#include <stdexcept>
#include <string>

namespace pixtime {

// Root of every error raised by the library. Subclasses name the failing
// subsystem so callers (and the CLI) can report a precise diagnostic.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define PIXTIME_DEFINE_ERROR(Name)                                             \
    class Name : public Error {                                                \
    public:                                                                    \
        using Error::Error;                                                    \
    }

PIXTIME_DEFINE_ERROR(DimensionError);
PIXTIME_DEFINE_ERROR(NumericError);
PIXTIME_DEFINE_ERROR(TapeError);
PIXTIME_DEFINE_ERROR(ConfigError);
PIXTIME_DEFINE_ERROR(DeterminismError);
PIXTIME_DEFINE_ERROR(PatchError);
PIXTIME_DEFINE_ERROR(CategoryError);
PIXTIME_DEFINE_ERROR(PartitionError);
PIXTIME_DEFINE_ERROR(AggregationError);
PIXTIME_DEFINE_ERROR(DataError);
PIXTIME_DEFINE_ERROR(ParseError);
PIXTIME_DEFINE_ERROR(FormatError);
PIXTIME_DEFINE_ERROR(EvaluationError);

#undef PIXTIME_DEFINE_ERROR

// Raised when a client's local loss stops being finite.
class DivergenceError : public Error {
public:
    DivergenceError(int node_id, long step, const std::string& what)
        : Error(what), node_id_(node_id), step_(step) {}

    int node_id() const noexcept { return node_id_; }
    long step() const noexcept { return step_; }

private:
    int node_id_;
    long step_;
};

}  // namespace pixtime
