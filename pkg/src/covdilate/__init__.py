"""Numerical workbench for coisometric extensions and unitary dilations of
contractive covariant representations of C*-dynamical systems, at finite
truncation, with machine-checkable verification of every construction."""

__version__ = "0.1.0"

from .numerics import (ComplexMatrix, DEFAULT_TOL, Tolerance, orthonormal_span,
                       psd_sqrt, residual, spectral_norm)
from .algebra import (AlgebraElement, FiniteDimCStarAlgebra, Representation,
                      StarHom, State, cyclic_decomposition, gns,
                      range_subalgebra_basis, verify_endomorphism,
                      verify_star_hom)
from .cpmaps import (CPMap, compose_rep, expectation_from_transfer,
                     stinespring_minimal, transfer_from_expectation,
                     verify_completely_positive, verify_transfer)
from .covariant import (AdaptedStrategy, CovariantPair, FiniteDimSystem,
                        GnsStrategy, HBExtension, TwoStepBlock, covariant_pair,
                        defect_operators, hb_extend, two_step,
                        verify_covariance)
from .extension import (DefectDecomposition, ExtensionChain, coisometric_extend,
                        defect_decomposition, verify_coisometric_extension)
from .dilation import (DilationRecord, compose_unitary,
                       explicit_matricial_unitary, schaffer_dilate,
                       unitary_dilate, verify_isometric_dilation)
from .tower import (GradedElement, ShiftTower, TowerExpectation, TowerSystem,
                    TowerTransfer, embed, shift_alpha, shift_down_pair,
                    standard_rep, transfer_phi)
from .equivalence import (EquivalenceCertificate, GramWitness,
                          chain_intertwiner, dilation_intertwiner,
                          stinespring_intertwiner)
from .scenario import Scenario, build_scenario, demo_fixture, load_scenario

__all__ = [
    "AdaptedStrategy", "AlgebraElement", "CPMap", "ComplexMatrix",
    "CovariantPair", "DEFAULT_TOL", "DefectDecomposition", "DilationRecord",
    "EquivalenceCertificate", "ExtensionChain", "FiniteDimCStarAlgebra",
    "FiniteDimSystem", "GnsStrategy", "GradedElement", "GramWitness",
    "HBExtension", "Representation", "Scenario", "ShiftTower", "StarHom",
    "State", "Tolerance", "TowerExpectation", "TowerSystem", "TowerTransfer",
    "TwoStepBlock", "build_scenario", "chain_intertwiner", "coisometric_extend",
    "compose_rep", "compose_unitary", "covariant_pair", "cyclic_decomposition",
    "defect_decomposition", "defect_operators", "demo_fixture",
    "dilation_intertwiner", "embed", "expectation_from_transfer",
    "explicit_matricial_unitary", "gns", "hb_extend", "load_scenario",
    "orthonormal_span", "psd_sqrt", "range_subalgebra_basis", "residual",
    "schaffer_dilate", "shift_alpha", "shift_down_pair", "spectral_norm",
    "standard_rep", "stinespring_intertwiner", "stinespring_minimal",
    "transfer_from_expectation", "transfer_phi", "two_step", "unitary_dilate",
    "verify_completely_positive", "verify_coisometric_extension",
    "verify_covariance", "verify_endomorphism", "verify_isometric_dilation",
    "verify_star_hom", "verify_transfer",
]
