from setuptools import setup, find_packages
import io

with io.open("README.md", encoding='utf-8') as f:
    long_description = f.read()

setup(
    name="blindalign",
    version="0.1.0",
    packages=find_packages(),
    install_requires=[
        "numpy>=1.24.3",
        "scipy>=1.10.0",
        "tqdm>=4.66.1"
    ],
    extras_require={
        "test": ["pytest>=7.4.3", "hypothesis>=6.82.0"],
    },
    entry_points={
        "console_scripts": [
            "blindalign=blindalign.cli:main_cli",
        ],
    },
    description="Blind interference alignment for MIMO broadcast channels with reconfigurable antennas",
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords="mimo interference-alignment degrees-of-freedom reconfigurable-antennas",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Programming Language :: Python :: 3.8",
    ],
    python_requires=">=3.8",
    package_data={
        'blindalign': ['tests/fixtures/*.json']
    },
    include_package_data=True
)
