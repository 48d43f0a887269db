from setuptools import find_packages, setup

setup(
    name="seamtrace",
    version="0.1.0",
    description="Seam-cutting contour extraction with a parabola prior and a global seam walk",
    packages=find_packages(include=["seamtrace_core", "seamtrace_cli"]),
    python_requires=">=3.9",
    install_requires=["numpy", "scipy", "pydantic>=2", "joblib", "pandas", "scikit-image"],
    extras_require={"test": ["pytest", "hypothesis"]},
    entry_points={"console_scripts": ["seamtrace=seamtrace_cli.main:main"]},
)
