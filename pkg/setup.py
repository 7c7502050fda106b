"""Setup file for minwave."""
from setuptools import setup, find_packages
from minwave.const import (__version__, PROJECT_NAME, PROJECT_LICENSE,
                           PROJECT_EMAIL, PROJECT_URL, PROJECT_AUTHOR)

REQUIRES = [
    'pyyaml>=5.1',
    'voluptuous>=0.11',
    'coloredlogs>=10.0',
    'numpy>=1.22',
    'scipy>=1.12',
]

PACKAGES = find_packages(exclude=['tests', 'tests.*'])

setup(
    name=PROJECT_NAME,
    version=__version__,
    url=PROJECT_URL,
    author=PROJECT_AUTHOR,
    author_email=PROJECT_EMAIL,
    license=PROJECT_LICENSE,
    packages=PACKAGES,
    include_package_data=True,
    platforms='any',
    python_requires='>=3.9',
    install_requires=REQUIRES,
    entry_points={
        'console_scripts': [
            'minwave = minwave.__main__:main'
        ]
    }
)
