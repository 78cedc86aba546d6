"""Two-qubit process tomography, gate-quality metrics and an ion-trap gate simulator."""
