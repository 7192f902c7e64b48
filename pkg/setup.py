from setuptools import find_packages, setup

# Command-line entry point of the structure-learning toolkit
ENTRY_POINTS = {
    'console_scripts': ['svrcd-bn=main:main'],
}

INSTALL_REQUIRES = [
    'numpy>=1.24.0',
    'pandas>=2.0.0',
    'scipy>=1.10.0',
    'networkx>=3.0',
]

setup(
    name='svrcd-bn',
    version='0.1.0',
    description='Bayesian-network structure learning with group-lasso and DAG penalties, '
                'optimized by variance-reduced block-coordinate descent',
    packages=find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    py_modules=['main'],
    python_requires='>=3.9',
    install_requires=INSTALL_REQUIRES,
    extras_require={'dev': ['pytest>=7.0.0', 'pytest-cov>=4.0.0', 'black>=23.0.0', 'flake8>=6.0.0']},
    entry_points=ENTRY_POINTS,
)
