#pragma once

// Convenience umbrella: the whole library in one include.

#include "adversary.hpp"
#include "auth_pake.hpp"
#include "auth_single.hpp"
#include "bytes.hpp"
#include "crypto.hpp"
#include "domain.hpp"
#include "error.hpp"
#include "hierarchy.hpp"
#include "oob.hpp"
#include "sharing.hpp"
#include "srp.hpp"
#include "storage.hpp"
