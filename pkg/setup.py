"""
bousci - pseudo-spectral convex integration lab for the Boussinesq equation
"""

from setuptools import setup, find_packages
from pathlib import Path

# Read README for long description
this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text(encoding='utf-8')

setup(
    name="bousci",
    version="0.1.0",
    description="Stage-by-stage convex integration for the 3D Boussinesq equation with thermal diffusion",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(where="service", exclude=["tests"]),
    package_dir={"": "service"},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Physics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "pandas>=2.0.0",
        "pyyaml>=6.0",
        "pydantic>=2.5.0",
        "colorlog>=6.8.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "hypothesis>=6.90.0",
            "black>=23.0.0",
            "flake8>=6.0.0",
            "mypy>=1.7.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "bousci=bousci.main:main",
        ],
    },
    include_package_data=True,
    package_data={
        "bousci": ["*.yaml"],
    },
    keywords=[
        "convex-integration",
        "boussinesq",
        "pseudo-spectral",
        "mikado-flows",
        "numerical-pde",
    ],
    zip_safe=False,
)
