#pragma once

#include "corpus.hpp"
#include "diagnostics.hpp"
#include "format.hpp"
#include "gmres.hpp"
#include "hessenberg.hpp"
#include "linalg.hpp"
#include "orthogonalization.hpp"
