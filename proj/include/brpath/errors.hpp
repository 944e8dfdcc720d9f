#pragma once

#include <stdexcept>
#include <string>

namespace brpath {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BRPATH_DEFINE_ERROR(Name)              \
  class Name : public Error {                  \
   public:                                     \
    explicit Name(const std::string& what)     \
        : Error(#Name ": " + what) {}          \
  }

BRPATH_DEFINE_ERROR(InvalidArgument);
BRPATH_DEFINE_ERROR(CutLocus);
BRPATH_DEFINE_ERROR(NonPositiveTime);
BRPATH_DEFINE_ERROR(UnsupportedFamily);
BRPATH_DEFINE_ERROR(ExcessiveRejection);
BRPATH_DEFINE_ERROR(HorizonMismatch);
BRPATH_DEFINE_ERROR(PartitionMismatch);
BRPATH_DEFINE_ERROR(ApexTooClose);
BRPATH_DEFINE_ERROR(InsufficientSamples);
BRPATH_DEFINE_ERROR(DesignMismatch);
BRPATH_DEFINE_ERROR(LadderTooCoarse);

#undef BRPATH_DEFINE_ERROR

}  // namespace brpath
