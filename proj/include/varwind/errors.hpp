#pragma once

#include <stdexcept>
#include <string>

namespace varwind {

enum class ErrorCode {
  kInvalidArgument = 1,
  kShape,
  kNumerical,
  kIngest,
  kMask,
  kCalibration,
  kCheckpoint,
  kConfig,
  kIo,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define VARWIND_DEFINE_ERROR(Name, Code)                             \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(Code, what) {}    \
  };

VARWIND_DEFINE_ERROR(InvalidArgument, ErrorCode::kInvalidArgument)
VARWIND_DEFINE_ERROR(ShapeError, ErrorCode::kShape)
VARWIND_DEFINE_ERROR(NumericalError, ErrorCode::kNumerical)
VARWIND_DEFINE_ERROR(IngestError, ErrorCode::kIngest)
VARWIND_DEFINE_ERROR(MaskError, ErrorCode::kMask)
VARWIND_DEFINE_ERROR(CalibrationError, ErrorCode::kCalibration)
VARWIND_DEFINE_ERROR(CheckpointError, ErrorCode::kCheckpoint)
VARWIND_DEFINE_ERROR(ConfigError, ErrorCode::kConfig)
VARWIND_DEFINE_ERROR(IoError, ErrorCode::kIo)
VARWIND_DEFINE_ERROR(InternalError, ErrorCode::kInternal)

#undef VARWIND_DEFINE_ERROR

}  // namespace varwind
