#include "support/oracles.hpp"

// header-only; this TU anchors the support library
