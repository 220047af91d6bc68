#pragma once

#include "shapecomp/admm.hpp"
#include "shapecomp/analysis.hpp"
#include "shapecomp/composer.hpp"
#include "shapecomp/csc_lp.hpp"
#include "shapecomp/dictionary.hpp"
#include "shapecomp/dsd.hpp"
#include "shapecomp/error.hpp"
#include "shapecomp/grid.hpp"
#include "shapecomp/imaging.hpp"
#include "shapecomp/io.hpp"
#include "shapecomp/lp.hpp"
#include "shapecomp/parallel.hpp"
#include "shapecomp/sparse.hpp"
#include "shapecomp/synthetic.hpp"

namespace shapecomp {
inline constexpr const char* version = "0.1.0";
}
