"""Exact arithmetic for integrable observables on moduli spaces of curves.

The package computes, over the rationals and with no floating point
anywhere, the leveled-tree classes built from an observable, the master
and geometric-master classes, the induced integrable hierarchies (fluxes,
Hamiltonians, Miura transformations, tau functions), and the Bernoulli
polynomial identities behind the dilaton equation for the orbifold
observable.  Everything genus 0 is built in; higher-genus DR-type data is
ingested from tables produced by independent oracles.
"""

__version__ = "0.1.0"
