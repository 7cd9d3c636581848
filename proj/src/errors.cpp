#include "pilate/errors.hpp"

namespace pilate {

void fail_validation(const std::string& msg) { throw ValidationError(msg); }

}  // namespace pilate
