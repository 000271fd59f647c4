// Header self-containment check; the library is header-only templates.
#include "io.hpp"
