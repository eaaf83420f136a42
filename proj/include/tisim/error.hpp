#pragma once

#include <stdexcept>
#include <string>

namespace tisim {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define TISIM_DEFINE_ERROR(Name)          \
    class Name : public Error {           \
    public:                               \
        using Error::Error;               \
    }

// scenario / graph
TISIM_DEFINE_ERROR(ParseError);
TISIM_DEFINE_ERROR(ValidationError);
TISIM_DEFINE_ERROR(UnknownNode);
TISIM_DEFINE_ERROR(IoError);

// routing
TISIM_DEFINE_ERROR(EmptyPath);
TISIM_DEFINE_ERROR(PreconditionError);
TISIM_DEFINE_ERROR(NoRoute);
/// Connectivity exists but the constraints exclude every path.
TISIM_DEFINE_ERROR(Infeasible);

// switching fabric
TISIM_DEFINE_ERROR(UnsupportedGeometry);
TISIM_DEFINE_ERROR(TooLarge);
TISIM_DEFINE_ERROR(UnstableQueue);
TISIM_DEFINE_ERROR(NoConnection);

// control plane
TISIM_DEFINE_ERROR(PolicyMismatch);
TISIM_DEFINE_ERROR(UnknownVehicle);
TISIM_DEFINE_ERROR(UnknownSignal);

// wire codec
TISIM_DEFINE_ERROR(CodecError);
class BadMagic : public CodecError {
public:
    using CodecError::CodecError;
};
class BadCrc : public CodecError {
public:
    using CodecError::CodecError;
};
class UnknownVersion : public CodecError {
public:
    using CodecError::CodecError;
};
class Truncated : public CodecError {
public:
    using CodecError::CodecError;
};

// simulation
TISIM_DEFINE_ERROR(Overcrowded);

#undef TISIM_DEFINE_ERROR

}  // namespace tisim
