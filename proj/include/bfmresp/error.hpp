#pragma once

#include <stdexcept>
#include <string>

namespace bfmresp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define BFMRESP_DEFINE_ERROR(Name)                  \
    class Name : public Error {                     \
    public:                                         \
        using Error::Error;                         \
    }

// codec
BFMRESP_DEFINE_ERROR(InvalidAngleError);
BFMRESP_DEFINE_ERROR(DecompositionError);
// ingest
BFMRESP_DEFINE_ERROR(TruncatedReportError);
BFMRESP_DEFINE_ERROR(IoError);
BFMRESP_DEFINE_ERROR(EmptyCaptureError);
BFMRESP_DEFINE_ERROR(ParseError);
// pipeline
BFMRESP_DEFINE_ERROR(ShapeError);
BFMRESP_DEFINE_ERROR(InsufficientDataError);
BFMRESP_DEFINE_ERROR(DegenerateInputError);
BFMRESP_DEFINE_ERROR(ConfigError);
BFMRESP_DEFINE_ERROR(AlignmentError);
BFMRESP_DEFINE_ERROR(OutOfRangeError);
// synth
BFMRESP_DEFINE_ERROR(SynthesisError);

#undef BFMRESP_DEFINE_ERROR

} // namespace bfmresp
