#pragma once

// Gaussian processes on oriented cellular complexes: combinatorial complex
// construction, Hodge/Dirac operator assembly, spectral kernels (CC-Matérn
// and reaction-diffusion), and GP regression on cochains.

#include "cellgp/common.hpp"
#include "cellgp/complex.hpp"
#include "cellgp/fields.hpp"
#include "cellgp/gp.hpp"
#include "cellgp/io.hpp"
#include "cellgp/kernels.hpp"
#include "cellgp/operators.hpp"
#include "cellgp/run.hpp"
