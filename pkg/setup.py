from setuptools import setup, find_packages

setup(
    name="homogeig",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    package_data={"homogeig": ["data/*.json"]},
    install_requires=[
        "numpy>=1.26.3",
        "scipy>=1.11.4",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.3",
            "pytest-cov>=4.1.0",
            "black>=23.12.1",
            "isort>=5.13.2",
            "flake8>=6.1.0",
        ],
    },
    python_requires=">=3.10",
    entry_points={
        "console_scripts": [
            "homogeig=homogeig.cli.main:main",
        ],
    },
)
