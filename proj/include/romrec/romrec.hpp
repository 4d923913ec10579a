#pragma once

#include "romrec/common.hpp"
#include "romrec/diag.hpp"
#include "romrec/harness.hpp"
#include "romrec/krylov.hpp"
#include "romrec/matcore.hpp"
#include "romrec/random.hpp"
#include "romrec/recover.hpp"
#include "romrec/rom1.hpp"
#include "romrec/sensing.hpp"
