"""Berggren-basis expansion of proton resonances with an
infinite-range Coulomb residual interaction.

Modules
-------
coulomb    complex-argument Coulomb wave functions F, H+, H-
potential  Woods-Saxon + smeared-Coulomb mean field, partial waves
radial     radial solver: pole searches, scattering states, exterior rays
basis      complex-momentum contours and discretized Berggren bases
kernel     residual-Coulomb matrix elements (cut / subtraction /
           off-diagonal schemes)
eig        complex-symmetric diagonalization, state selection, rms
quadstudy  quadrature-error study for the shifted-diagonal rule
config     versioned YAML run configuration
cli        command-line driver (poles / basis / diag / table / rms /
           quadstudy)
report     optional PNG rendering next to the CSV output
"""

__version__ = "0.1.0"
