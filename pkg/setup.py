from setuptools import setup  # type: ignore[import]

setup(
    name="btc-lab",
    version="0.1.0",
    description="Boundary time crystals with power-law dissipation",
    package_dir={"": "src"},
    packages=["btc", "harness"],
    python_requires=">=3.9",
    install_requires=["numpy", "pydantic>=2", "scipy"],
    entry_points={"console_scripts": ["btc-lab=harness.cli:main"]},
)
