#!/usr/bin/env python3
"""Regenerate the bundled FCIDUMP fixtures in data/.

Requires pyscf. The fixtures are checked in, so this only needs to run when
a geometry or basis changes. Canonical RHF orbitals are written unchanged.
"""
import os
import sys

import numpy as np
from pyscf import ao2mo, gto, scf
from pyscf.tools import fcidump

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")


def chain(n, spacing):
    return [("H", (0.0, 0.0, i * spacing)) for i in range(n)]


def write(name, atoms, basis, n_mo=None):
    mol = gto.M(atom=atoms, basis=basis, unit="Angstrom", verbose=0)
    mf = scf.RHF(mol).run(conv_tol=1e-12)
    mo = mf.mo_coeff if n_mo is None else mf.mo_coeff[:, :n_mo]
    h1 = mo.T @ mf.get_hcore() @ mo
    eri = ao2mo.restore(8, ao2mo.kernel(mol, mo), mo.shape[1])
    path = os.path.join(OUT, name)
    fcidump.from_integrals(path, h1, eri, mo.shape[1], mol.nelectron,
                           nuc=mol.energy_nuc(), ms=0, tol=1e-14)
    print(f"{name}: norb={mo.shape[1]} nelec={mol.nelectron} e_hf={mf.e_tot:.12f}")


def main():
    os.makedirs(OUT, exist_ok=True)
    write("h2_sto3g.fcidump", chain(2, 0.7414), "sto-3g")
    write("h4_sto3g.fcidump", chain(4, 1.0), "sto-3g")
    write("h6_sto3g.fcidump", chain(6, 1.0), "sto-3g")
    write("h2_631g.fcidump", chain(2, 0.7414), "6-31g")
    # Highest two virtuals dropped so every (N+-1) sector stays small.
    write("h4_631g_6mo.fcidump", chain(4, 1.0), "6-31g", n_mo=6)


if __name__ == "__main__":
    sys.exit(main())
