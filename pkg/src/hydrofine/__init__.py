"""Hyperfine splitting of a translation-invariant hydrogen atom coupled to a
quantized field: fiber Hamiltonian on a truncated Fock space, the second-order
Γ matrix, Feshbach-Schur reduction and numerical operator-bound checks."""
from .model import (PhysicalParams, DerivedConstants, derive_constants, pauli, spin_exchange,
                    decompose_two_spin, compose_two_spin, singlet_vector)
from .grid import GridSpec, ModeGrid, build_grid, refine
from .fock import (FockBasis, FockModel, SpectrumResult, build_model, enumerate_basis, build_h0,
                   build_w, build_hg, ground_spectrum, observables)
from .gamma import (GammaMatrix, SplittingReport, gamma_continuum, gamma_discrete,
                    c0_closed_form, c0_quadrature, splitting_prediction)
from .feshbach import (FeshbachConfig, FeshbachResult, project_p_rho, feshbach_direct,
                       feshbach_series, f0_norm_check)

__version__ = "0.1.0"
